#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "floqskin/model.hpp"

#include <cmath>

using namespace floqskin;

TEST_CASE("defaults validate and count sites") {
    const auto p = fig1_params();
    CHECK_NOTHROW(p.validate());
    CHECK(p.sites() == 300);
    CHECK(p.cell() == 3);
    CHECK(p.period() == doctest::Approx(5.0 * pi));

    ModelParams s = p;
    s.omega = 0.0;
    CHECK(s.period() == 1.0);

    ModelParams inc = p;
    inc.flux = Flux::irrational(0.49);
    inc.gamma = {-1.2, 0.0};
    inc.n_cells = 250;
    CHECK(inc.sites() == 250);
    CHECK(inc.cell() == 2);
}

TEST_CASE("invalid parameters are rejected") {
    auto p = fig1_params();
    p.gamma = {-1.2, 0.0};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = fig1_params();
    p.n_cells = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = fig1_params();
    p.impurities = {{300, 0.1}};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = fig1_params();
    p.flux = Flux::ratio(2, 6);
    p.gamma = {0, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("json round trip and unknown keys") {
    auto p = fig1_params();
    p.impurities = {{100, 0.1}};
    p.boundary = Boundary::OBC;
    const nlohmann::json j = p;
    const auto back = j.get<ModelParams>();
    CHECK(back.flux.q == 3);
    CHECK(back.boundary == Boundary::OBC);
    REQUIRE(back.impurities.size() == 1);
    CHECK(back.impurities[0].site == 100);
    CHECK(nlohmann::json(back) == j);

    auto bad = j;
    bad["colour"] = 1;
    CHECK_THROWS_AS(bad.get<ModelParams>(), ConfigError);
    bad = j;
    bad["flux"] = {{"rational", {1, 3}}, {"real", 0.3}};
    CHECK_THROWS_AS(bad.get<ModelParams>(), ConfigError);
    bad = j;
    bad["boundary"] = "open";
    CHECK_THROWS_AS(bad.get<ModelParams>(), ConfigError);
}

TEST_CASE("Bloch matrix is Hermitian without loss and carries i gamma with it") {
    auto p = fig1_params();
    p.gamma = {0.0, 0.0, 0.0};
    for (double k : {-2.0, 0.3, 1.7})
        for (double t : {0.0, 1.1, 7.0}) {
            const auto h = bloch_hamiltonian(p, k, t);
            CHECK((h - h.adjoint()).norm() < 1e-14);
        }
    p = fig1_params();
    const auto h = bloch_hamiltonian(p, 0.4, 2.0);
    CHECK(h(0, 0).imag() == doctest::Approx(-1.2));
    CHECK(h(1, 1).imag() == 0.0);
}

TEST_CASE("beta form agrees with k form on the unit circle") {
    const auto p = fig1_params();
    CMatrix h(3, 3);
    for (double k : {-3.0, -0.5, 0.0, 2.2}) {
        fill_bloch_beta(p, std::polar(1.0, k), 1.3, h);
        CHECK((h - bloch_hamiltonian(p, k, 1.3)).norm() < 1e-14);
        CHECK((bloch_hamiltonian_beta(p, MomentumPoint::bloch(k).beta, 1.3) - h).norm() < 1e-14);
    }
    const auto m = MomentumPoint::generalized(0.7, 0.2);
    CHECK(m.k() == doctest::Approx(0.7));
    CHECK(m.mu() == doctest::Approx(0.2));
}

TEST_CASE("real-space ring acts on plane waves like the Bloch matrix") {
    auto p = fig1_params();
    p.n_cells = 12;
    p.impurities.clear();
    const auto H = real_space_hamiltonian(p, 0.9);
    const int q = 3;
    for (int j : {0, 1, 5, 11}) {
        const double k = 2.0 * pi * j / p.n_cells;
        const auto hb = bloch_hamiltonian(p, k, 0.9);
        CVector u(3);
        u << cplx(0.3, 0.1), cplx(-0.7, 0.2), cplx(0.5, -0.4);
        CVector psi(p.sites());
        for (int m = 0; m < p.n_cells; ++m)
            for (int s = 0; s < q; ++s) psi[q * m + s] = std::polar(1.0, k * m) * u[s];
        const CVector lhs = H * psi;
        const CVector hu = hb * u;
        double err = 0.0;
        for (int m = 0; m < p.n_cells; ++m)
            for (int s = 0; s < q; ++s) err = std::max(err, std::abs(lhs[q * m + s] - std::polar(1.0, k * m) * hu[s]));
        CHECK(err < 1e-13);
    }
}

TEST_CASE("open chain drops the ring closure; impurities add on site") {
    auto p = fig1_params();
    p.n_cells = 5;
    p.boundary = Boundary::OBC;
    p.impurities = {{4, 0.25}};
    const auto H = real_space_hamiltonian(p, 0.0);
    CHECK(H(0, 14) == cplx(0.0));
    CHECK(H(0, 1) == cplx(-1.0));
    auto q = p;
    q.impurities.clear();
    const auto H0 = real_space_hamiltonian(q, 0.0);
    CHECK((H - H0)(4, 4) == cplx(0.25));
    CHECK((H - H0).cwiseAbs().sum() == doctest::Approx(0.25));

    const auto c = real_space_chain(p, 0.0);
    CHECK((c.dense() - H).norm() < 1e-15);
}

TEST_CASE("rational and nearby irrational flux give the same chain") {
    auto p = fig1_params();
    auto q = p;
    q.flux = Flux::irrational(1.0 / 3.0 + 1e-12);
    q.n_cells = 300;
    q.dissipation_period = 3;
    const auto a = real_space_hamiltonian(p, 2.0);
    const auto b = real_space_hamiltonian(q, 2.0);
    // on-site phases drift by 2 pi 1e-12 n, so the last site moves by at most v 2 pi 1e-12 (L - 1)
    const double bound = p.v * 2.0 * pi * 1e-12 * double(p.sites() - 1);
    CHECK((a - b).cwiseAbs().maxCoeff() <= bound * (1.0 + 1e-3));
    CHECK((a - b).cwiseAbs().topLeftCorner(150, 150).maxCoeff() < 1e-9);
}

TEST_CASE("irrational flux has no Bloch form") {
    auto p = fig1_params();
    p.flux = Flux::irrational(0.3);
    p.n_cells = 100;
    CHECK_THROWS_AS(bloch_hamiltonian(p, 0.0, 0.0), UnsupportedRepresentation);
}

TEST_CASE("single-site cell puts both closures on the diagonal") {
    ModelParams p;
    p.flux = Flux::ratio(1, 1);
    p.gamma = {-0.5};
    p.omega = 0.0;
    const auto h = bloch_hamiltonian(p, 0.8, 0.0);
    REQUIRE(h.rows() == 1);
    CHECK(std::abs(h(0, 0) - cplx(p.v - 2.0 * std::cos(0.8), -0.5)) < 1e-14);
}
