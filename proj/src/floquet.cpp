#include "floqskin/floquet.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace floqskin {

namespace {

void check_finite(const CMatrix& h, double t) {
    if (!h.allFinite()) throw PropagationError("propagation: non-finite Hamiltonian at t = " + std::to_string(t));
}

double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

} // namespace

PeriodPropagator partial_propagator(const HamiltonianSampler& h, double T, int n_steps, int n_slices) {
    if (n_steps < 1) throw ConfigError("propagator: n_steps must be >= 1");
    if (!(T > 0.0)) throw ConfigError("propagator: period must be positive");
    const double dt = T / n_steps;
    PeriodPropagator out;
    out.n_steps = n_steps;
    out.period = T;
    ExpmWorkspace ws;
    CMatrix a, step, tmp;
    for (int j = 0; j < n_slices; ++j) {
        const double t = (j + 0.5) * dt;
        a = h(t);
        check_finite(a, t);
        if (j == 0) out.matrix.setIdentity(a.rows(), a.cols());
        a *= cplx(0.0, -dt);
        ws.compute(a, step);
        tmp.noalias() = step * out.matrix;
        out.matrix.swap(tmp);
    }
    return out;
}

PeriodPropagator period_propagator(const HamiltonianSampler& h, double T, int n_steps) {
    return partial_propagator(h, T, n_steps, n_steps);
}

BlochPropagatorWorkspace::BlochPropagatorWorkspace(const ModelParams& p, int n_steps)
    : p_(p), n_steps_(n_steps), T_(p.period()) {
    if (n_steps < 1) throw ConfigError("propagator: n_steps must be >= 1");
    if (!p.flux.rational) throw UnsupportedRepresentation("bloch propagator: irrational flux has no Bloch form");
    const double dt = T_ / n_steps;
    diag_.resize(std::size_t(n_steps));
    for (int j = 0; j < n_steps; ++j) diag_[std::size_t(j)] = bloch_onsite(p_, (j + 0.5) * dt);
}

namespace {

template <int N>
using Fixed = Eigen::Matrix<cplx, N, N>;

// max column sum of |re| + |im|; within sqrt(2) of the 1-norm and free of hypot calls
template <int N>
double fixed_norm1(const Fixed<N>& a) {
    double m = 0.0;
    for (int c = 0; c < N; ++c) {
        double s = 0.0;
        for (int r = 0; r < N; ++r) s += std::abs(a(r, c).real()) + std::abs(a(r, c).imag());
        m = std::max(m, s);
    }
    return m;
}

template <int N>
Fixed<N> fixed_expm(Fixed<N> a) {
    const double nrm = fixed_norm1<N>(a);
    int squarings = 0;
    if (nrm > 0.5) squarings = int(std::ceil(std::log2(nrm / 0.5)));
    if (squarings > 0) a *= std::ldexp(1.0, -squarings);
    Fixed<N> out = Fixed<N>::Identity();
    Fixed<N> term = Fixed<N>::Identity();
    for (int k = 1; k <= 40; ++k) {
        term = (term * a) / double(k);
        out += term;
        if (fixed_norm1<N>(term) <= 1e-18 * fixed_norm1<N>(out)) break;
    }
    for (int s = 0; s < squarings; ++s) out = (out * out).eval();
    return out;
}

template <int N>
void fixed_product(const CMatrix& hop, const std::vector<CVector>& diag, double dt, CMatrix& acc) {
    const Fixed<N> h = hop;
    Fixed<N> u = Fixed<N>::Identity();
    for (const auto& d : diag) {
        Fixed<N> a = h;
        a.diagonal() += d;
        u = (fixed_expm<N>(a * cplx(0.0, -dt)) * u).eval();
    }
    acc = u;
}

} // namespace

const CMatrix& BlochPropagatorWorkspace::compute(cplx beta) {
    const double dt = T_ / n_steps_;
    // hopping part: full matrix minus its on-site terms
    fill_bloch_beta(p_, beta, 0.0, h_);
    h_.diagonal() -= bloch_onsite(p_, 0.0);
    if (!h_.allFinite()) throw PropagationError("propagation: non-finite Bloch matrix");
    const Eigen::Index q = h_.rows();
    switch (q) {
    case 1: fixed_product<1>(h_, diag_, dt, acc_); return acc_;
    case 2: fixed_product<2>(h_, diag_, dt, acc_); return acc_;
    case 3: fixed_product<3>(h_, diag_, dt, acc_); return acc_;
    case 4: fixed_product<4>(h_, diag_, dt, acc_); return acc_;
    default: break;
    }
    acc_.setIdentity(q, q);
    for (int j = 0; j < n_steps_; ++j) {
        step_ = h_;
        step_.diagonal() += diag_[std::size_t(j)];
        step_ *= cplx(0.0, -dt);
        ws_.compute(step_, tmp_);
        step_.noalias() = tmp_ * acc_;
        acc_.swap(step_);
    }
    return acc_;
}

PeriodPropagator bloch_propagator(const ModelParams& p, cplx beta, int n_steps) {
    BlochPropagatorWorkspace ws(p, n_steps);
    PeriodPropagator out;
    out.matrix = ws.compute(beta);
    out.n_steps = n_steps;
    out.period = ws.period();
    return out;
}

PeriodPropagator realspace_propagator(const ModelParams& p, int n_steps) {
    if (n_steps < 1) throw ConfigError("propagator: n_steps must be >= 1");
    const double T = p.period();
    const double dt = T / n_steps;
    ChainOperator h = real_space_chain(p, 0.0);
    PeriodPropagator out;
    out.n_steps = n_steps;
    out.period = T;
    const auto L = Eigen::Index(p.sites());
    out.matrix.setIdentity(L, L);
    for (int j = 0; j < n_steps; ++j) {
        real_space_diagonal(p, (j + 0.5) * dt, h.diag);
        chain_exp_apply(h, dt, out.matrix);
    }
    return out;
}

CVector propagator_quasienergies(const CMatrix& U, double T) {
    const auto ev = eig(U, false).values;
    CVector out(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) out[i] = quasienergy(ev[i], T);
    return out;
}

EffectiveHamiltonian effective_hamiltonian(const PeriodPropagator& U, const std::string& label) {
    const double T = U.period;
    EffectiveHamiltonian out;
    out.period = T;
    const auto unorm = std::max(1.0, U.matrix.norm());
    auto reproduces = [&](const CMatrix& hf) {
        const CMatrix back = expm(cplx(0.0, -T) * hf);
        return (back - U.matrix).norm() <= 1e-8 * unorm;
    };

    const auto dec = eig(U.matrix, true);
    if (condition_number(dec.vectors) <= 1e8) {
        out.quasienergies.resize(dec.values.size());
        for (Eigen::Index i = 0; i < dec.values.size(); ++i) out.quasienergies[i] = quasienergy(dec.values[i], T);
        out.matrix = dec.vectors * out.quasienergies.asDiagonal() * dec.vectors.inverse();
        if (reproduces(out.matrix)) return out;
    }

    out.schur_fallback = true;
    const CMatrix logu = U.matrix.log();
    out.matrix = cplx(0.0, 1.0 / T) * logu;
    if (!out.matrix.allFinite() || !reproduces(out.matrix))
        throw DefectivePropagator("effective hamiltonian: defective propagator" +
                                  (label.empty() ? std::string() : " at " + label));
    const auto ev = eig(out.matrix, false).values;
    out.quasienergies.resize(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) out.quasienergies[i] = fold_quasienergy(ev[i], T);
    return out;
}

std::vector<double> uniform_k_grid(int n) {
    if (n < 2) throw ConfigError("k grid: need at least 2 points");
    std::vector<double> k(static_cast<std::size_t>(n));
    // spans (-pi, pi]
    for (int i = 0; i < n; ++i) k[std::size_t(i)] = -pi + 2.0 * pi * (i + 1) / n;
    return k;
}

QuasienergyBands quasienergy_bands(const ModelParams& p, const std::vector<double>& k_grid, int n_steps) {
    if (k_grid.empty()) throw ConfigError("bands: empty k grid");
    if (!std::is_sorted(k_grid.begin(), k_grid.end())) throw ConfigError("bands: k grid must be sorted");
    BlochPropagatorWorkspace ws(p, n_steps);
    const double T = ws.period();
    const double zone = 2.0 * pi / T;
    const auto nk = Eigen::Index(k_grid.size());
    const auto q = Eigen::Index(p.flux.q);

    QuasienergyBands out;
    out.k = k_grid;
    out.period = T;
    out.bands.resize(nk, q);
    out.velocity.resize(nk, q);

    CMatrix prev_vecs;
    for (Eigen::Index i = 0; i < nk; ++i) {
        const auto dec = eig(ws.compute(std::polar(1.0, k_grid[std::size_t(i)])), true);
        CVector eps(q);
        for (Eigen::Index a = 0; a < q; ++a) eps[a] = quasienergy(dec.values[a], T);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(q));
        if (i == 0) {
            for (Eigen::Index a = 0; a < q; ++a) order[std::size_t(a)] = a;
        } else {
            const Eigen::MatrixXd overlap = (prev_vecs.adjoint() * dec.vectors).cwiseAbs();
            std::vector<bool> used(static_cast<std::size_t>(q), false);
            bool tie = false;
            for (Eigen::Index a = 0; a < q; ++a) {
                Eigen::Index best = -1;
                double best_val = -1.0;
                for (Eigen::Index b = 0; b < q; ++b) {
                    if (used[std::size_t(b)]) continue;
                    const double o = overlap(a, b);
                    if (best >= 0 && std::abs(o - best_val) < 1e-6) tie = true;
                    if (o > best_val + 1e-6) {
                        best = b;
                        best_val = o;
                    }
                }
                used[std::size_t(best)] = true;
                order[std::size_t(a)] = best;
            }
            if (tie) {
                std::ostringstream msg;
                msg << "tracking degeneracy at k = " << k_grid[std::size_t(i)];
                out.warnings.push_back(msg.str());
            }
        }
        CMatrix vecs(q, q);
        for (Eigen::Index a = 0; a < q; ++a) {
            const auto b = order[std::size_t(a)];
            vecs.col(a) = dec.vectors.col(b);
            cplx e = eps[b];
            if (i > 0) {
                const double prev = out.bands(i - 1, a).real();
                e.real(e.real() + zone * std::round((prev - e.real()) / zone));
            }
            out.bands(i, a) = e;
        }
        prev_vecs = std::move(vecs);
    }

    const CMatrix d = band_derivatives(out);
    out.velocity = d.real();
    return out;
}

CMatrix band_derivatives(const QuasienergyBands& b) {
    const auto nk = b.bands.rows();
    CMatrix d = CMatrix::Zero(nk, b.bands.cols());
    if (nk < 2) return d;
    for (Eigen::Index i = 0; i < nk; ++i) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, i - 1);
        const Eigen::Index hi = std::min<Eigen::Index>(nk - 1, i + 1);
        const double dk = b.k[std::size_t(hi)] - b.k[std::size_t(lo)];
        d.row(i) = (b.bands.row(hi) - b.bands.row(lo)) / dk;
    }
    return d;
}

double hausdorff_quasienergy(const CVector& a, const CVector& b, double T) {
    auto directed = [T](const CVector& x, const CVector& y) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < y.size(); ++j) best = std::min(best, quasienergy_distance(x[i], y[j], T));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

SymmetryReport check_q2_reciprocity(const ModelParams& p, const std::vector<double>& ks, int n_steps) {
    if (!p.flux.rational || p.flux.q != 2)
        throw WrongModel("q2 reciprocity: requires q = 2 (got q = " + std::to_string(p.flux.q) + ")");
    SymmetryReport r;
    r.relation = "Eq5";
    BlochPropagatorWorkspace ws(p, n_steps);
    for (double k : ks) {
        PeriodPropagator up{ws.compute(std::polar(1.0, k)), n_steps, 2, ws.period()};
        PeriodPropagator um{ws.compute(std::polar(1.0, -k)), n_steps, 2, ws.period()};
        const auto hp = effective_hamiltonian(up, "k = " + std::to_string(k));
        const auto hm = effective_hamiltonian(um, "k = " + std::to_string(-k));
        r.max_deviation = std::max(r.max_deviation, (hp.matrix - hm.matrix.transpose()).norm());
        r.spectral_deviation =
            std::max(r.spectral_deviation, hausdorff_quasienergy(hp.quasienergies, hm.quasienergies, ws.period()));
    }
    return r;
}

SymmetryReport check_hidden_symmetry(const ModelParams& p, const std::vector<double>& ks, int n_steps) {
    if (!p.flux.rational) throw UnsupportedRepresentation("hidden symmetry: irrational flux has no Bloch form");
    if (n_steps % 2 != 0) throw ConfigError("hidden symmetry: n_steps must be even to split the period");
    const auto q = Eigen::Index(p.flux.q);
    SymmetryReport r;
    r.relation = "Eq7";
    r.u_op = CMatrix::Zero(q, q);
    for (Eigen::Index n = 0; n < q; ++n) r.u_op(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    BlochPropagatorWorkspace ws(p, n_steps);
    const double T = ws.period();
    for (double k : ks) {
        const double kp = double(q) * pi - k;
        PeriodPropagator uk{ws.compute(std::polar(1.0, k)), n_steps, 2, T};
        PeriodPropagator ukp{ws.compute(std::polar(1.0, kp)), n_steps, 2, T};
        const auto hk = effective_hamiltonian(uk, "k = " + std::to_string(k));
        const auto hkp = effective_hamiltonian(ukp, "k = " + std::to_string(kp));
        r.s_op = partial_propagator([&](double t) { return bloch_hamiltonian(p, kp, t); }, T, n_steps,
                                    n_steps / 2)
                     .matrix;
        r.v_op = r.u_op * r.s_op;
        const CMatrix lhs = r.v_op.inverse() * hk.matrix.conjugate() * r.v_op;
        r.max_deviation = std::max(r.max_deviation, max_abs(lhs + hkp.matrix));
        const CVector mirrored = -hkp.quasienergies.conjugate();
        r.spectral_deviation = std::max(r.spectral_deviation, hausdorff_quasienergy(hk.quasienergies, mirrored, T));
    }
    return r;
}

SymmetryReport check_trace_identity(const ModelParams& p, const std::vector<double>& ks, int n_steps) {
    SymmetryReport r;
    r.relation = "trace-zero";
    BlochPropagatorWorkspace ws(p, n_steps);
    const double T = ws.period();
    bool first = true;
    cplx ref{};
    for (double k : ks) {
        const auto eps = propagator_quasienergies(ws.compute(std::polar(1.0, k)), T);
        const cplx tr = eps.sum();
        if (first) {
            ref = tr;
            first = false;
            continue;
        }
        const cplx d = tr - ref;
        r.max_deviation = std::max(r.max_deviation, std::hypot(fold_real(d.real(), T), d.imag()));
    }
    return r;
}

} // namespace floqskin
