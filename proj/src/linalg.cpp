#include "floqskin/linalg.hpp"

#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <cmath>
#include <string>
#include <vector>

namespace floqskin {

namespace {

// max column sum of |re| + |im|; within sqrt(2) of the 1-norm and free of hypot calls
double norm1(const CMatrix& A) {
    double m = 0.0;
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
        double s = 0.0;
        for (Eigen::Index r = 0; r < A.rows(); ++r) s += std::abs(A(r, c).real()) + std::abs(A(r, c).imag());
        m = std::max(m, s);
    }
    return m;
}

} // namespace

void ExpmWorkspace::compute(CMatrix& A, CMatrix& out) {
    const Eigen::Index n = A.rows();
    const double nrm = norm1(A);
    int squarings = 0;
    if (nrm > 0.5) squarings = int(std::ceil(std::log2(nrm / 0.5)));
    if (squarings > 0) A *= std::ldexp(1.0, -squarings);

    out.setIdentity(n, n);
    term_.setIdentity(n, n);
    for (int k = 1; k <= 40; ++k) {
        next_.noalias() = term_ * A;
        term_ = next_ / double(k);
        out += term_;
        if (norm1(term_) <= 1e-18 * norm1(out)) break;
    }
    for (int s = 0; s < squarings; ++s) {
        next_.noalias() = out * out;
        out.swap(next_);
    }
}

CMatrix expm(const CMatrix& A) {
    ExpmWorkspace ws;
    CMatrix a = A;
    CMatrix out;
    ws.compute(a, out);
    return out;
}

namespace {

template <class M>
void chain_exp_apply_impl(const ChainOperator& H, double dt, M& X) {
    const double bound = H.norm_bound() * std::abs(dt);
    if (!std::isfinite(bound)) throw PropagationError("propagation: non-finite Hamiltonian entries");
    const int sub = std::max(1, int(std::ceil(bound)));
    const double h = dt / sub;
    M term, next, acc;
    for (int s = 0; s < sub; ++s) {
        acc = X;
        term = X;
        const double anorm = std::max(acc.norm(), 1e-300);
        for (int k = 1; k <= 60; ++k) {
            H.apply(term, next);
            term = next * cplx(0.0, -h / double(k));
            acc += term;
            if (term.norm() <= 1e-17 * anorm) break;
        }
        X.swap(acc);
    }
}

} // namespace

void chain_exp_apply(const ChainOperator& H, double dt, CMatrix& X) { chain_exp_apply_impl(H, dt, X); }
void chain_exp_apply(const ChainOperator& H, double dt, CVector& x) { chain_exp_apply_impl(H, dt, x); }

EigenDecomposition eig(const CMatrix& A, bool with_vectors) {
    const int n = int(A.rows());
    EigenDecomposition out;
    out.values.resize(n);
    if (n == 0) return out;
    CMatrix a = A;
    CMatrix vr;
    if (with_vectors) vr.resize(n, n);
    const char jobvr = with_vectors ? 'V' : 'N';
    cplx dummy;
    const int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', jobvr, n, a.data(), n, out.values.data(), &dummy, 1,
                                   with_vectors ? vr.data() : &dummy, with_vectors ? n : 1);
    if (info != 0) throw NumericalError("eigensolver: zgeev failed with info " + std::to_string(info));
    if (with_vectors) {
        for (Eigen::Index c = 0; c < vr.cols(); ++c) vr.col(c).normalize();
        out.vectors = std::move(vr);
    }
    return out;
}

double condition_number(const CMatrix& A) {
    Eigen::JacobiSVD<CMatrix> svd(A);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

double fold_real(double re, double T) {
    const double w = 2.0 * pi / T;
    double r = std::remainder(re, w); // in [-w/2, w/2]
    if (r <= -0.5 * w) r += w;
    return r;
}

cplx fold_quasienergy(cplx e, double T) { return {fold_real(e.real(), T), e.imag()}; }

cplx quasienergy(cplx lambda, double T) {
    return fold_quasienergy(cplx(-std::arg(lambda), std::log(std::abs(lambda))) / T, T);
}

double quasienergy_distance(cplx a, cplx b, double T) {
    const double dr = fold_real(a.real() - b.real(), T);
    return std::hypot(dr, a.imag() - b.imag());
}

} // namespace floqskin
