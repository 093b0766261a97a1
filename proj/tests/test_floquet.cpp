#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floqskin/floquet.hpp"

#include <random>

using namespace floqskin;

namespace {

/// Classical RK4 for dU/dt = -i H(t) U, fixed step.
CMatrix rk4_propagator(const ModelParams& p, cplx beta, int n) {
    const double T = p.period();
    const double h = T / n;
    const int q = int(p.cell());
    CMatrix U = CMatrix::Identity(q, q);
    auto f = [&](double t, const CMatrix& X) -> CMatrix { return -I * bloch_hamiltonian_beta(p, beta, t) * X; };
    for (int j = 0; j < n; ++j) {
        const double t = j * h;
        const CMatrix k1 = f(t, U);
        const CMatrix k2 = f(t + h / 2, U + h / 2 * k1);
        const CMatrix k3 = f(t + h / 2, U + h / 2 * k2);
        const CMatrix k4 = f(t + h, U + h * k3);
        U += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return U;
}

} // namespace

TEST_CASE("product propagator converges to the ODE solution") {
    const auto p = fig1_params();
    for (cplx beta : {cplx(1.0), std::polar(0.9, 0.7)}) {
        const CMatrix ref = rk4_propagator(p, beta, 20000);
        const auto u = bloch_propagator(p, beta, 2000);
        CHECK((u.matrix - ref).norm() < 1e-4);
        CHECK(u.n_steps == 2000);
        CHECK(u.period == doctest::Approx(5.0 * pi));
    }
}

TEST_CASE("fixed-size path equals the generic product") {
    for (long q : {2L, 3L, 4L, 5L}) {
        auto p = fig1_params();
        p.flux = Flux::ratio(1, q);
        p.gamma.assign(std::size_t(q), 0.0);
        p.gamma[0] = -0.7;
        const cplx beta = std::polar(1.1, -0.4);
        const auto generic =
            period_propagator([&](double t) { return bloch_hamiltonian_beta(p, beta, t); }, p.period(), 64);
        CHECK((bloch_propagator(p, beta, 64).matrix - generic.matrix).norm() < 1e-12);
        BlochPropagatorWorkspace ws(p, 64);
        CHECK((ws.compute(beta) - generic.matrix).norm() < 1e-12);
    }
}

TEST_CASE("loss-free propagator is unitary") {
    auto p = fig1_params();
    p.gamma = {0.0, 0.0, 0.0};
    const auto u = bloch_propagator(p, std::polar(1.0, 1.3)).matrix;
    CHECK((u * u.adjoint() - CMatrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("determinant carries only the loss") {
    // Tr H(t) = i sum gamma because the cosines of equally spaced phases cancel
    const auto p = fig1_params();
    const double T = p.period();
    for (double k : {-1.0, 0.2, 2.9}) {
        const cplx d = bloch_propagator(p, std::polar(1.0, k)).matrix.determinant();
        CHECK(std::abs(d - std::exp(-1.2 * T)) < 1e-10 * std::exp(-1.2 * T));
    }
}

TEST_CASE("single-site cell: commuting family gives the analytic Floquet Hamiltonian") {
    ModelParams p;
    p.flux = Flux::ratio(1, 1);
    p.gamma = {-0.5};
    const double T = p.period();
    for (double k : {-2.5, 0.0, 0.9}) {
        const auto hf = effective_hamiltonian(bloch_propagator(p, std::polar(1.0, k)));
        const cplx ref = fold_quasienergy(cplx(-2.0 * p.u * std::cos(k), -0.5), T);
        CHECK(quasienergy_distance(hf.matrix(0, 0), ref, T) < 1e-10);
    }
}

TEST_CASE("effective Hamiltonian reproduces the propagator") {
    const auto p = fig1_params();
    const auto U = bloch_propagator(p, std::polar(1.0, 0.37));
    const auto hf = effective_hamiltonian(U, "k=0.37");
    CHECK((expm(-I * hf.matrix * U.period) - U.matrix).norm() < 1e-10);
    for (Eigen::Index i = 0; i < hf.quasienergies.size(); ++i)
        CHECK(std::abs(hf.quasienergies[i].real()) <= pi / U.period + 1e-12);
}

TEST_CASE("loss-free bands are real and velocities sum to zero") {
    auto p = fig1_params();
    p.gamma = {0.0, 0.0, 0.0};
    const auto b = quasienergy_bands(p, uniform_k_grid(101));
    CHECK(b.bands.imag().cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < b.velocity.rows(); ++i) CHECK(std::abs(b.velocity.row(i).sum()) < 1e-8);
    const auto g = uniform_k_grid(4);
    CHECK(g.front() > -pi);
    CHECK(g.back() == doctest::Approx(pi));
}

TEST_CASE("trace of H_F is constant in k") {
    const auto r = check_trace_identity(fig1_params(), uniform_k_grid(41));
    CHECK(r.max_deviation < 1e-8);
}

TEST_CASE("q=2 reciprocity holds with loss; other q are rejected") {
    auto p = fig1_params();
    p.flux = Flux::ratio(1, 2);
    p.gamma = {-0.8, 0.0};
    const auto r = check_q2_reciprocity(p, {-2.0, -0.3, 0.5, 1.9});
    CHECK(r.max_deviation < 1e-8);
    CHECK_THROWS_AS(check_q2_reciprocity(fig1_params(), {0.1}), WrongModel);
}

TEST_CASE("hidden symmetry for several loss placements") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ud(-pi, pi), gd(-1.5, 0.0);
    std::vector<double> ks(6);
    for (auto& k : ks) k = ud(rng);
    auto p = fig1_params();
    for (int trial = 0; trial < 3; ++trial) {
        const auto r = check_hidden_symmetry(p, ks);
        CHECK(r.max_deviation < 1e-6);
        CHECK(r.spectral_deviation < 1e-6);
        for (auto& g : p.gamma) g = gd(rng);
    }
    CHECK_THROWS_AS(check_hidden_symmetry(fig1_params(), ks, 201), ConfigError);
}

TEST_CASE("Hausdorff distance respects the quasienergy period") {
    const double T = 2.0;
    CVector a(2), b(2);
    a << cplx(pi / T - 1e-4, 0.0), cplx(0.0, -1.0);
    b << cplx(-pi / T + 1e-4, 0.0), cplx(0.0, -1.0);
    CHECK(hausdorff_quasienergy(a, b, T) == doctest::Approx(2e-4));
}
