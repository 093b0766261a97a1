#include "floqskin/dynamics.hpp"
#include "floqskin/gbz.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace floqskin;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double time_limit; ///< seconds
    std::function<Outcome()> run;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

CVector pick(const SpectrumResult& s, const std::vector<std::size_t>& idx, int half = 0) {
    std::vector<cplx> v;
    for (auto i : idx) {
        const cplx z = s.eigenvalues[Eigen::Index(i)];
        if ((half > 0 && z.real() <= 0.0) || (half < 0 && z.real() >= 0.0)) continue;
        v.push_back(z);
    }
    return Eigen::Map<CVector>(v.data(), Eigen::Index(v.size()));
}

struct SpectralSlope {
    double k_m = 0.0;
    double im = 0.0;
    double slope = 0.0;
};

/// Least-damped Bloch mode and the slope of its band there.
SpectralSlope spectral_slope(const ModelParams& p) {
    const auto b = quasienergy_bands(p, uniform_k_grid(801));
    Eigen::Index r = 0, c = 0;
    b.bands.imag().maxCoeff(&r, &c);
    return {b.k[std::size_t(r)], b.bands(r, c).imag(), b.velocity(r, c)};
}

double median_spacing(const CVector& e, double T) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < e.size(); ++j)
            if (j != i) best = std::min(best, quasienergy_distance(e[i], e[j], T));
        d.push_back(best);
    }
    std::nth_element(d.begin(), d.begin() + std::ptrdiff_t(d.size() / 2), d.end());
    return d[d.size() / 2];
}

Outcome q1_oracle() {
    ModelParams p;
    p.flux = Flux::ratio(1, 1);
    p.gamma = {-0.5};
    p.n_cells = 100;
    const double T = p.period();
    double worst = 0.0;
    for (int i = 0; i < 101; ++i) {
        const double k = -pi + 2.0 * pi * i / 100.0;
        const auto hf = effective_hamiltonian(bloch_propagator(p, std::polar(1.0, k)));
        const cplx oracle(-2.0 * p.u * std::cos(k), p.gamma[0]);
        worst = std::max(worst, quasienergy_distance(hf.matrix(0, 0), oracle, T));
    }
    return {worst < 1e-8, "max |H_F - (i g - 2u cos k)| = " + fmt(worst) + " (< 1e-8)"};
}

Outcome velocity_sum() {
    const auto b = quasienergy_bands(fig1_params(), uniform_k_grid(801));
    const auto d = band_derivatives(b);
    double worst = 0.0, worst_re = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        worst = std::max(worst, std::abs(d.row(i).sum()));
        worst_re = std::max(worst_re, std::abs(b.velocity.row(i).sum()));
    }
    return {worst < 1e-8 && worst_re < 1e-8,
            "max |sum d eps/dk| = " + fmt(worst) + ", real parts " + fmt(worst_re) + " (< 1e-8)"};
}

Outcome reciprocity() {
    auto p = fig1_params();
    p.flux = Flux::ratio(1, 2);
    p.gamma = {-1.2, 0.0};
    const auto r = check_q2_reciprocity(p, uniform_k_grid(101));
    return {r.max_deviation < 1e-8, "max ||H_F(k) - H_F(-k)^T|| = " + fmt(r.max_deviation) + " (< 1e-8)"};
}

Outcome hidden_symmetry() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ud(-pi, pi), share(0.0, 1.0);
    std::vector<double> ks(16);
    for (auto& k : ks) k = ud(rng);
    auto p = fig1_params();
    double op = 0.0, spec = 0.0;
    std::string parts;
    for (int trial = 0; trial < 4; ++trial) {
        if (trial > 0) {
            // same total loss spread randomly over the cell
            double w[3] = {share(rng), share(rng), share(rng)};
            const double s = w[0] + w[1] + w[2];
            for (int a = 0; a < 3; ++a) p.gamma[std::size_t(a)] = -1.2 * w[a] / s;
        }
        const auto r = check_hidden_symmetry(p, ks);
        op = std::max(op, r.max_deviation);
        spec = std::max(spec, r.spectral_deviation);
    }
    return {op < 1e-6 && spec < 1e-6,
            "operator " + fmt(op) + ", quasienergy set " + fmt(spec) + " over 4 loss patterns (< 1e-6)"};
}

Outcome fig2() {
    auto p = fig1_params();
    p.boundary = Boundary::OBC;
    const auto obc = realspace_floquet_spectrum(p, Boundary::OBC, default_n_steps, true);
    const auto pbc = realspace_floquet_spectrum(p, Boundary::PBC, default_n_steps, false);
    const double T = obc.period;
    const double h = hausdorff_quasienergy(obc.eigenvalues, pbc.eigenvalues, T);
    const double spacing = median_spacing(obc.eigenvalues, T);
    const auto edges = detect_edge_states(obc);
    const auto bulk = pick(obc, complement(obc.size(), edges));
    const double cover = winding_coverage(pbc_loops(p), bulk);
    const auto skin = skin_weight(obc, dominant_band(obc), "dominant");
    const bool distinct = h > 5.0 * spacing;
    return {distinct && cover >= 0.95 && edges.size() == 3 && skin.left_mass_fraction > 0.9,
            "OBC/PBC Hausdorff " + fmt(h) + " (> 5 x spacing " + fmt(spacing) + "), winding coverage " + fmt(cover) +
                " (>= 0.95), edge states " + std::to_string(edges.size()) + " (== 3), left mass " +
                fmt(skin.left_mass_fraction) + " (> 0.9)"};
}

Outcome gbz_inside() {
    auto p = fig1_params();
    p.boundary = Boundary::OBC;
    const auto s = realspace_floquet_spectrum(p, Boundary::OBC, default_n_steps, true);
    const auto band = pick(s, dominant_band(s), +1);
    auto g = gbz_circle_scan(p, band);
    classify_features(g, band, s.period);

    auto h = p;
    h.gamma = {0.0, 0.0, 0.0};
    const auto sh = realspace_floquet_spectrum(h, Boundary::OBC, default_n_steps, true);
    const auto hb = pick(sh, dominant_band(sh));
    const auto gh = gbz_circle_scan(h, hb);
    const bool collapsed = gh.r_min >= 0.998 && gh.r_max <= 1.002;
    const bool features = g.saddles.size() >= 2 && g.cusps.size() >= 2;
    return {g.r_max < 1.0 && collapsed && features,
            "lossy range [" + fmt(g.r_min) + ", " + fmt(g.r_max) + "] (r_max < 1), Hermitian range [" +
                fmt(gh.r_min) + ", " + fmt(gh.r_max) + "] (within [0.998, 1.002]), saddle roots " +
                std::to_string(g.saddles.size()) + ", cusp roots " + std::to_string(g.cusps.size()) + " (>= 2 each)"};
}

Outcome velocity_consistency() {
    auto p = fig1_params();
    p.n_cells = 400;
    const auto ref = spectral_slope(p);
    const double x0 = double(p.sites() / 2);
    const double vd = dominant_velocity(evolve(p, InitialState::delta(x0), 300)).v;
    const double vg = dominant_velocity(evolve(p, InitialState::gaussian(x0, 15.0), 300)).v;
    const double ed = std::abs(vd - ref.slope) / std::abs(ref.slope);
    const double eg = std::abs(vg - ref.slope) / std::abs(ref.slope);
    return {ed < 0.05 && eg < 0.05, "slope at k_m=" + fmt(ref.k_m) + ": " + fmt(ref.slope) + "; delta v'=" + fmt(vd) +
                                        " (rel " + fmt(ed) + "), Gaussian v'=" + fmt(vg) + " (rel " + fmt(eg) +
                                        ") (< 0.05)"};
}

Outcome drift_pair() {
    auto p = fig1_params();
    auto q = p;
    q.flux = Flux::irrational(std::sqrt(2.0) / 1.415 / 3.0);
    q.n_cells = 300;
    q.dissipation_period = 3;
    const double vc = dominant_velocity(evolve(p, InitialState::delta(150), 300)).v;
    const double vi = dominant_velocity(evolve(q, InitialState::delta(150), 300)).v;
    const bool ok = std::abs(vc + 0.0400) <= 0.002 && std::abs(vi + 0.0425) <= 0.002;
    return {ok, "commensurate v'=" + fmt(vc) + " (-0.0400 +- 0.002), incommensurate v'=" + fmt(vi) +
                    " (-0.0425 +- 0.002)"};
}

Outcome decay_rate() {
    const auto p = fig1_params();
    const auto ref = spectral_slope(p);
    auto est = propagator_element(p, p.sites() / 2, 300, default_substeps, true);
    fit_decay_rate(est, 0.3, ref.im);
    const double rel = std::abs(est.lambda - ref.im) / std::abs(ref.im);

    // residual of the sub-period samples about the stroboscopic line, and its period-to-period correlation
    std::vector<double> res;
    for (std::size_t i = 0; i < est.times.size(); ++i)
        if (est.times[i] >= est.t1) res.push_back(est.log_abs_g[i] - est.lambda * est.times[i]);
    const double mean = std::accumulate(res.begin(), res.end(), 0.0) / double(res.size());
    double var = 0.0;
    for (auto& r : res) {
        r -= mean;
        var += r * r;
    }
    const double sd = std::sqrt(var / double(res.size()));
    const std::size_t per = std::size_t(default_substeps);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i + per < res.size(); ++i) {
        num += res[i] * res[i + per];
        da += res[i] * res[i];
        db += res[i + per] * res[i + per];
    }
    const double corr = num / std::sqrt(da * db);
    return {rel < 0.05 && sd > 1e-3 && corr > 0.9,
            "lambda=" + fmt(est.lambda) + " vs Im eps_m=" + fmt(ref.im) + " (rel " + fmt(rel) +
                " < 0.05); sub-period residual sd " + fmt(sd) + " (> 1e-3), period-T correlation " + fmt(corr) +
                " (> 0.9)"};
}

double reflected_fraction(double gamma) {
    auto p = fig1_params();
    p.gamma = {gamma, 0.0, 0.0};
    p.n_cells = 300;
    const auto L = p.sites();
    p.impurities = {{L / 3, 0.1 * p.u}};
    const auto bands = bloch_band_vectors(p, 0.0);
    // impurity sits to the left: take the band moving left fastest
    const auto& b = bands.front();
    std::vector<cplx> u(b.u.data(), b.u.data() + b.u.size());
    const auto r = impurity_experiment(p, InitialState::gaussian(double(L / 2), 15.0, u), 800, default_substeps, 5,
                                       45.0);
    if (!r.conclusive) throw NumericalError("impurity run inconclusive: " + r.diagnostic);
    return r.reflected;
}

Outcome impurity() {
    const double herm = reflected_fraction(0.0);
    const double lossy = reflected_fraction(-1.2);
    return {herm >= 5.0 * lossy && lossy < 0.01, "reflected Hermitian " + fmt(herm) + ", lossy " + fmt(lossy) +
                                                     " (ratio " + fmt(herm / lossy) + " >= 5, lossy < 0.01)"};
}

Outcome gamma_onset() {
    std::vector<double> gammas;
    for (int i = 0; i <= 120; ++i) gammas.push_back(-0.01 * i);
    const auto rows = gamma_sweep(fig1_params(), gammas);
    const auto gc = critical_gamma(rows, 5e-3);
    if (!gc) return {false, "split never exceeds 5e-3"};
    return {std::abs(*gc - 0.2) <= 0.05, "split exceeds 5e-3 at gamma_a=" + fmt(-*gc) + " (-0.2 +- 0.05)"};
}

Outcome direction_reversal() {
    std::string d;
    bool ok = true;
    for (double w : {0.4, 1.2}) {
        auto p = fig1_params();
        p.omega = w;
        const double v = dominant_velocity(evolve(p, InitialState::delta(150), 300)).v;
        auto o = p;
        o.boundary = Boundary::OBC;
        const auto s = realspace_floquet_spectrum(o, Boundary::OBC, default_n_steps, true);
        const auto range = radial_range(o, pick(s, dominant_band(s)));
        const bool want_negative = w < 1.0;
        const bool sign_ok = want_negative ? v < 0.0 : v > 0.0;
        const bool agree = (range.direction == Direction::Left && v < 0.0) ||
                           (range.direction == Direction::Right && v > 0.0);
        ok = ok && sign_ok && agree;
        if (!d.empty()) d += "; ";
        d += "Omega=" + fmt(w) + ": v'=" + fmt(v) + (want_negative ? " (< 0)" : " (> 0)") + ", GBZ range [" +
             fmt(range.r_min) + ", " + fmt(range.r_max) + "] " + direction_name(range.direction) +
             (agree ? " (agrees)" : " (disagrees)");
    }
    return {ok, d};
}

Outcome near_half() {
    std::vector<double> le, ld;
    IncommensurateReport last;
    for (double d : {10000.0, 3000.0, 1000.0}) {
        auto p = fig1_params();
        p.flux = Flux::irrational(0.5 - pi / d);
        p.gamma = {-1.2, 0.0};
        p.dissipation_period = 2;
        p.n_cells = 300;
        p.boundary = Boundary::OBC;
        last = incommensurate_near_half(p);
        le.push_back(std::log(pi / d));
        ld.push_back(std::log(last.delta_E));
    }
    const double mx = std::accumulate(le.begin(), le.end(), 0.0) / 3.0;
    const double my = std::accumulate(ld.begin(), ld.end(), 0.0) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (le[std::size_t(i)] - mx) * (ld[std::size_t(i)] - my);
        sxx += (le[std::size_t(i)] - mx) * (le[std::size_t(i)] - mx);
    }
    const double slope = sxy / sxx;
    const bool valleys = std::abs(last.valley_spacing - 80.0) <= 8.0;
    const bool sides = last.count[0] > 0 && last.count[1] > 0 && last.side_I * last.side_II < 0.0;
    return {valleys && std::abs(slope - 1.0) <= 0.1 && sides,
            "valley spacing " + fmt(last.valley_spacing) + " cells (80 +- 8), N_min from flux " + std::to_string(last.n_min) +
                ", dE log-log slope " + fmt(slope) + " (1.0 +- 0.1), band I/II sides " + fmt(last.side_I) + " / " +
                fmt(last.side_II) + " (opposite)"};
}

Outcome boundary_independence_check() {
    auto p = fig1_params();
    p.n_cells = 200;
    const auto r = boundary_independence(p, InitialState::gaussian(300, 15.0), 300);
    return {r.max_difference < 1e-6 && r.periods_compared >= 10,
            "max per-site difference " + fmt(r.max_difference) + " (< 1e-6) over " +
                std::to_string(r.periods_compared) + " periods before edge arrival"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "q=1 analytic oracle", 1.0, q1_oracle},
        {2, "trace-zero velocity sum", 5.0, velocity_sum},
        {3, "q=2 reciprocity", 5.0, reciprocity},
        {4, "hidden symmetry", 10.0, hidden_symmetry},
        {5, "OBC/PBC spectra, edge states, skin", 60.0, fig2},
        {6, "GBZ inside the unit circle", 300.0, gbz_inside},
        {7, "drift velocity vs band slope", 60.0, velocity_consistency},
        {8, "commensurate vs incommensurate drift", 120.0, drift_pair},
        {9, "decay rate", 60.0, decay_rate},
        {10, "impurity robustness", 120.0, impurity},
        {11, "loss-sweep onset", 120.0, gamma_onset},
        {12, "direction reversal by frequency", 120.0, direction_reversal},
        {13, "flux near 1/2", 180.0, near_half},
        {14, "boundary independence", 60.0, boundary_independence_check},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = dt < c.time_limit;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << "; "
                  << fmt(dt) << " s (< " << fmt(c.time_limit) << " s)" << std::endl;
    }
    std::cout << failed << " criteria failed" << std::endl;
    return failed == 0 ? 0 : 1;
}
