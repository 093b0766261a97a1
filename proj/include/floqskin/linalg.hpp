#pragma once

#include "floqskin/model.hpp"
#include "floqskin/types.hpp"

namespace floqskin {

/// exp(A) by scaling and squaring with a truncated Taylor series.
CMatrix expm(const CMatrix& A);

/// Workspace for repeated small exponentials of the same size.
class ExpmWorkspace {
public:
    /// out = exp(A); A is overwritten.
    void compute(CMatrix& A, CMatrix& out);

private:
    CMatrix term_, next_;
};

/// X <- exp(-i H dt) X for a chain operator, Taylor series with internal substeps.
void chain_exp_apply(const ChainOperator& H, double dt, CMatrix& X);
void chain_exp_apply(const ChainOperator& H, double dt, CVector& x);

struct EigenDecomposition {
    CVector values;
    CMatrix vectors; ///< right eigenvectors, unit columns; empty when not requested
};

/// General complex eigenproblem (LAPACK zgeev).
EigenDecomposition eig(const CMatrix& A, bool with_vectors = true);

/// 2-norm condition number via singular values.
double condition_number(const CMatrix& A);

/// Fold a real part into (-pi/T, pi/T].
double fold_real(double re, double T);
cplx fold_quasienergy(cplx e, double T);

/// Quasienergy of a propagator eigenvalue: (i/T) log(lambda), principal branch, folded.
cplx quasienergy(cplx lambda, double T);

/// Distance between two quasienergies with the real part taken modulo 2pi/T.
double quasienergy_distance(cplx a, cplx b, double T);

} // namespace floqskin
