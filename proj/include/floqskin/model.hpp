#pragma once

#include "floqskin/types.hpp"

#include <json.hpp>
#include <cstddef>
#include <vector>

namespace floqskin {

enum class Boundary { PBC, OBC };

/// Flux per site, either p/q with gcd(p,q)=1 or a real number.
struct Flux {
    bool rational = true;
    long p = 1;
    long q = 3;
    double real = 0.0;

    static Flux ratio(long p, long q);
    static Flux irrational(double value);
    double value() const { return rational ? double(p) / double(q) : real; }
};

struct Impurity {
    std::size_t site = 0;
    double strength = 0.0;
};

/// Driven dissipative AAH chain. Hoppings carry -u.
struct ModelParams {
    double u = 1.0;
    double v = 1.0;
    Flux flux;
    double phase_offset = 0.0;
    double omega = 0.4;
    std::vector<double> gamma{-1.2, 0.0, 0.0};
    int n_cells = 100;
    Boundary boundary = Boundary::PBC;
    std::vector<Impurity> impurities;
    /// Period of the gamma pattern for irrational flux; 0 picks round(1/flux).
    int dissipation_period = 0;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    std::size_t sites() const;
    /// Sites per unit cell: q, or the dissipation period for irrational flux.
    int cell() const;
    /// Drive period 2pi/omega; a static model uses T = 1.
    double period() const;
    /// gamma entry acting on site n.
    double gamma_at(std::size_t n) const;
};

ModelParams fig1_params();

void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);

/// Generalized momentum beta = exp(i(k - i mu)).
struct MomentumPoint {
    cplx beta{1.0, 0.0};

    static MomentumPoint bloch(double k) { return {std::polar(1.0, k)}; }
    static MomentumPoint generalized(double k, double mu) { return {std::polar(std::exp(-mu), k)}; }
    double k() const { return std::arg(beta); }
    double mu() const { return -std::log(std::abs(beta)); }
};

CMatrix bloch_hamiltonian(const ModelParams& p, double k, double t);
CMatrix bloch_hamiltonian_beta(const ModelParams& p, cplx beta, double t);

/// On-site part of the Bloch matrix at time t.
CVector bloch_onsite(const ModelParams& p, double t);

/// Same as bloch_hamiltonian_beta, written into a preallocated q x q matrix.
void fill_bloch_beta(const ModelParams& p, cplx beta, double t, CMatrix& h);

/// Tridiagonal chain with uniform hopping -u, optional ring closure.
struct ChainOperator {
    CVector diag;
    double hop = 1.0;
    bool periodic = true;

    std::size_t size() const { return std::size_t(diag.size()); }
    /// Upper bound on the induced 1-norm.
    double norm_bound() const;
    /// out = H * in, column by column.
    void apply(const CMatrix& in, CMatrix& out) const;
    void apply(const CVector& in, CVector& out) const;
    CMatrix dense() const;
};

/// Instantaneous real-space Hamiltonian in chain form.
ChainOperator real_space_chain(const ModelParams& p, double t);
/// Only the on-site part; cheaper when the chain is reused.
void real_space_diagonal(const ModelParams& p, double t, CVector& diag);

CMatrix real_space_hamiltonian(const ModelParams& p, double t);

} // namespace floqskin
