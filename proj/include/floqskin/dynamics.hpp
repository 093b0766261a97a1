#pragma once

#include "floqskin/floquet.hpp"

#include <optional>
#include <string>
#include <vector>

namespace floqskin {

inline constexpr int default_substeps = 100;

struct InitialState {
    enum class Kind { Gaussian, Delta, Custom };
    Kind kind = Kind::Delta;
    double x0 = 0.0;    ///< center site
    double sigma = 1.0; ///< width in sites
    std::vector<cplx> u_vec; ///< internal vector over one unit cell; empty means uniform
    CVector custom;

    static InitialState gaussian(double x0, double sigma, std::vector<cplx> u_vec = {});
    static InitialState delta(double x0);
    static InitialState from_vector(CVector psi);

    /// Unit-norm state on the chain of p.
    CVector build(const ModelParams& p) const;
};

/// Fourth-order commutator-free Magnus stepping of the real-space Schroedinger equation.
class Evolver {
public:
    Evolver(const ModelParams& p, int n_substeps = default_substeps);
    /// Advance psi across substep j of a period.
    void substep(CVector& psi, int j);
    /// Advance psi by one full period.
    void period(CVector& psi);
    int n_substeps() const { return n_substeps_; }
    double dt() const { return T_ / n_substeps_; }
    double period_length() const { return T_; }

private:
    ModelParams p_;
    int n_substeps_;
    double T_;
    ChainOperator h_;
    std::vector<CVector> diag_;
};

struct EvolutionRecord {
    std::vector<double> times;
    std::vector<RVector> density; ///< |psi|^2 per snapshot
    std::vector<double> log_norms; ///< log of the raw norm per snapshot
    bool renormalized = true;
    ModelParams params;
    CVector final_state; ///< unit norm
};

/// Evolve n_periods, record every `stride` periods. The state is rescaled every period
/// and the discarded log-norm accumulated, so strong loss never underflows.
EvolutionRecord evolve(const ModelParams& p, const InitialState& init, int n_periods,
                       int n_substeps = default_substeps, int stride = 1);

/// Position in sites per snapshot; circular mean on a ring, unwrapped in time.
std::vector<double> center_of_mass(const EvolutionRecord& rec);

struct VelocityFit {
    double v = 0.0;  ///< unit cells per time
    double r2 = 0.0;
    std::vector<double> com;
    std::string diagnostic;
};

VelocityFit dominant_velocity(const EvolutionRecord& rec, double burn_in = 0.3);

/// Drift velocities (cells per time) of the separate density peaks in the last snapshot.
std::vector<double> velocity_components(const EvolutionRecord& rec, double x0, double min_rel_height = 0.05);

struct BandVector {
    CVector u;
    cplx eps;
    double velocity = 0.0; ///< d Re eps / dk
};

/// Bloch eigenvectors of H_F(k) with band velocities, sorted by velocity.
std::vector<BandVector> bloch_band_vectors(const ModelParams& p, double k, int n_steps = default_n_steps);

struct ImpurityResult {
    double reflected = 0.0;
    double transmitted = 0.0;
    int measured_period = -1;
    bool conclusive = false;
    std::string diagnostic;
};

/// Run the same packet with and without the single impurity of p; the reflected part is the
/// difference on the incidence side once the free packet has passed the impurity.
ImpurityResult impurity_experiment(const ModelParams& p, const InitialState& init, int max_periods,
                                   int n_substeps = default_substeps, int buffer = 5, double margin = 15.0);

struct DecayEstimate {
    std::size_t site = 0;
    std::vector<double> times;
    std::vector<double> log_abs_g;
    std::vector<bool> stroboscopic;
    double lambda = 0.0;
    double t1 = 0.0, t2 = 0.0;
    double residual_rms = 0.0;
    double reference = 0.0;
    std::string diagnostic;
};

/// log|<a|U(t,0)|a>| at stroboscopic times, plus every substep when sub_period is set.
DecayEstimate propagator_element(const ModelParams& p, std::size_t a, int n_periods,
                                 int n_substeps = default_substeps, bool sub_period = false);

/// Least-squares slope over stroboscopic samples after the burn-in fraction.
void fit_decay_rate(DecayEstimate& est, double burn_in = 0.3, double reference = 0.0);

struct GammaSweepRow {
    double gamma = 0.0;
    std::vector<double> im_k0;       ///< sorted descending
    std::vector<double> velocity_k0; ///< band velocities at k = 0
    double split = 0.0;              ///< max - min of im_k0
    std::optional<double> v_prime;
};

/// Sweep the loss on the first sublattice; dynamics only when init is given.
std::vector<GammaSweepRow> gamma_sweep(const ModelParams& p, const std::vector<double>& gammas,
                                       const std::optional<InitialState>& init = std::nullopt, int n_periods = 100,
                                       int n_steps = default_n_steps);

/// Smallest |gamma| with split above threshold, linearly interpolated; nullopt if never.
std::optional<double> critical_gamma(const std::vector<GammaSweepRow>& rows, double threshold = 5e-3);

struct FrequencyRow {
    double omega = 0.0;
    VelocityFit fit;
};

std::vector<FrequencyRow> frequency_direction(const ModelParams& p, const std::vector<double>& omegas,
                                              const InitialState& init, int n_periods, double burn_in = 0.3);

struct BoundaryComparison {
    double max_difference = 0.0; ///< largest per-site density difference before arrival
    int periods_compared = 0;
};

/// Evolve under OBC and PBC in lockstep until the PBC packet reaches the edge sites.
BoundaryComparison boundary_independence(const ModelParams& p, const InitialState& init, int max_periods,
                                         int n_substeps = default_substeps, int edge_sites = 5,
                                         double arrival = 1e-12);

} // namespace floqskin
