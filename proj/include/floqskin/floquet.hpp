#pragma once

#include "floqskin/linalg.hpp"
#include "floqskin/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace floqskin {

inline constexpr int default_n_steps = 200;

struct PeriodPropagator {
    CMatrix matrix;
    int n_steps = 0;
    int integrator_order = 2;
    double period = 0.0;
};

using HamiltonianSampler = std::function<CMatrix(double)>;

/// U = prod_{j = n..1} exp(-i H(t_j) dt), t_j slice midpoints, later times to the left.
PeriodPropagator period_propagator(const HamiltonianSampler& h, double T, int n_steps);

/// Same product restricted to [0, t_end], with the slice width T / n_steps.
PeriodPropagator partial_propagator(const HamiltonianSampler& h, double T, int n_steps, int n_slices);

/// Bloch propagator at generalized momentum beta; fast path for small q.
PeriodPropagator bloch_propagator(const ModelParams& p, cplx beta, int n_steps = default_n_steps);

/// Reusable buffers for repeated Bloch propagators of one model.
class BlochPropagatorWorkspace {
public:
    explicit BlochPropagatorWorkspace(const ModelParams& p, int n_steps = default_n_steps);
    const CMatrix& compute(cplx beta);
    double period() const { return T_; }
    int n_steps() const { return n_steps_; }

private:
    ModelParams p_;
    int n_steps_;
    double T_;
    std::vector<CVector> diag_; ///< on-site terms per slice
    CMatrix h_, step_, acc_, tmp_;
    ExpmWorkspace ws_;
};

/// L x L one-period propagator in real space (boundary and impurities from p).
PeriodPropagator realspace_propagator(const ModelParams& p, int n_steps = default_n_steps);

struct EffectiveHamiltonian {
    CMatrix matrix;
    double period = 0.0;
    CVector quasienergies; ///< folded into (-pi/T, pi/T]
    bool schur_fallback = false;
};

/// H_F = (i/T) log U, principal branch through the eigenbasis; Schur logarithm when the
/// eigenvector condition number exceeds 1e8. `label` names the momentum in errors.
EffectiveHamiltonian effective_hamiltonian(const PeriodPropagator& U, const std::string& label = {});

/// Folded quasienergies of a propagator without forming H_F.
CVector propagator_quasienergies(const CMatrix& U, double T);

struct QuasienergyBands {
    std::vector<double> k;
    CMatrix bands;          ///< rows k, columns band; real parts unwrapped along k
    Eigen::MatrixXd velocity; ///< d Re eps / dk, central differences
    double period = 0.0;
    std::vector<std::string> warnings;
};

std::vector<double> uniform_k_grid(int n);

QuasienergyBands quasienergy_bands(const ModelParams& p, const std::vector<double>& k_grid,
                                   int n_steps = default_n_steps);

/// Complex d eps / dk of every band, central differences (one-sided at the ends).
CMatrix band_derivatives(const QuasienergyBands& b);

struct SymmetryReport {
    std::string relation;
    double max_deviation = 0.0;
    double spectral_deviation = 0.0;
    CMatrix u_op, s_op, v_op; ///< from the last sample
};

SymmetryReport check_q2_reciprocity(const ModelParams& p, const std::vector<double>& ks,
                                    int n_steps = default_n_steps);

SymmetryReport check_hidden_symmetry(const ModelParams& p, const std::vector<double>& ks,
                                     int n_steps = default_n_steps);

/// Max deviation of Tr H_F(k) from its value at the first grid point.
SymmetryReport check_trace_identity(const ModelParams& p, const std::vector<double>& ks,
                                    int n_steps = default_n_steps);

/// Hausdorff distance between two quasienergy sets, real parts modulo 2pi/T.
double hausdorff_quasienergy(const CVector& a, const CVector& b, double T);

} // namespace floqskin
