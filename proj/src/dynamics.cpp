#include "floqskin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace floqskin {

InitialState InitialState::gaussian(double x0, double sigma, std::vector<cplx> u_vec) {
    InitialState s;
    s.kind = Kind::Gaussian;
    s.x0 = x0;
    s.sigma = sigma;
    s.u_vec = std::move(u_vec);
    return s;
}

InitialState InitialState::delta(double x0) {
    InitialState s;
    s.kind = Kind::Delta;
    s.x0 = x0;
    return s;
}

InitialState InitialState::from_vector(CVector psi) {
    InitialState s;
    s.kind = Kind::Custom;
    s.custom = std::move(psi);
    return s;
}

CVector InitialState::build(const ModelParams& p) const {
    const auto L = Eigen::Index(p.sites());
    CVector psi = CVector::Zero(L);
    switch (kind) {
    case Kind::Delta: {
        const auto x = Eigen::Index(std::lround(x0));
        if (x < 0 || x >= L) throw ConfigError("initial state: x0 outside [0, L)");
        psi[x] = 1.0;
        break;
    }
    case Kind::Gaussian: {
        if (x0 < 0.0 || x0 >= double(L)) throw ConfigError("initial state: x0 outside [0, L)");
        if (!(sigma > 0.0)) throw ConfigError("initial state: sigma must be positive");
        const bool ring = p.boundary == Boundary::PBC;
        const int cell = p.cell();
        if (!u_vec.empty() && int(u_vec.size()) != cell)
            throw ConfigError("initial state: u_vec must have one entry per unit-cell site");
        for (Eigen::Index x = 0; x < L; ++x) {
            double d = double(x) - x0;
            if (ring) d = std::remainder(d, double(L));
            const cplx amp = u_vec.empty() ? cplx(1.0) : u_vec[std::size_t(x % cell)];
            psi[x] = std::exp(-d * d / (2.0 * sigma * sigma)) * amp;
        }
        break;
    }
    case Kind::Custom:
        if (custom.size() != L) throw ConfigError("initial state: custom vector has the wrong length");
        psi = custom;
        break;
    }
    const double n = psi.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("initial state: zero or non-finite norm");
    return psi / n;
}

Evolver::Evolver(const ModelParams& p, int n_substeps) : p_(p), n_substeps_(n_substeps), T_(p.period()) {
    if (n_substeps < 1) throw ConfigError("evolve: n_substeps must be >= 1");
    p_.validate();
    h_ = real_space_chain(p_, 0.0);
    h_.hop *= 0.5;
    // fourth-order commutator-free Magnus: two exponentials of Gauss-point combinations
    const double c = std::sqrt(3.0) / 6.0;
    const double a1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0, a2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
    diag_.resize(2 * std::size_t(n_substeps));
    CVector d1, d2;
    for (int j = 0; j < n_substeps; ++j) {
        real_space_diagonal(p_, (j + 0.5 - c) * dt(), d1);
        real_space_diagonal(p_, (j + 0.5 + c) * dt(), d2);
        diag_[2 * std::size_t(j)] = a2 * d1 + a1 * d2;
        diag_[2 * std::size_t(j) + 1] = a1 * d1 + a2 * d2;
    }
}

void Evolver::substep(CVector& psi, int j) {
    h_.diag = diag_[2 * std::size_t(j)];
    chain_exp_apply(h_, dt(), psi);
    h_.diag = diag_[2 * std::size_t(j) + 1];
    chain_exp_apply(h_, dt(), psi);
}

void Evolver::period(CVector& psi) {
    for (int j = 0; j < n_substeps_; ++j) substep(psi, j);
}

namespace {

double rescale(CVector& psi) {
    const double n = psi.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw PropagationError("evolve: norm left the representable range");
    psi /= n;
    return std::log(n);
}

} // namespace

EvolutionRecord evolve(const ModelParams& p, const InitialState& init, int n_periods, int n_substeps, int stride) {
    if (n_periods < 0) throw ConfigError("evolve: n_periods must be >= 0");
    if (stride < 1) throw ConfigError("evolve: stride must be >= 1");
    if (n_substeps < 20) throw ConfigError("evolve: n_substeps must be >= 20");
    Evolver ev(p, n_substeps);
    EvolutionRecord rec;
    rec.params = p;
    CVector psi = init.build(p);
    double log_norm = 0.0;
    auto record = [&](double t) {
        rec.times.push_back(t);
        rec.density.push_back(psi.cwiseAbs2());
        rec.log_norms.push_back(log_norm);
    };
    record(0.0);
    for (int n = 1; n <= n_periods; ++n) {
        ev.period(psi);
        log_norm += rescale(psi);
        if (n % stride == 0) record(n * ev.period_length());
    }
    rec.final_state = psi;
    return rec;
}

std::vector<double> center_of_mass(const EvolutionRecord& rec) {
    std::vector<double> com;
    com.reserve(rec.density.size());
    if (rec.density.empty()) return com;
    const auto L = rec.density.front().size();
    if (rec.params.boundary == Boundary::OBC) {
        RVector x = RVector::LinSpaced(L, 0.0, double(L - 1));
        for (const auto& d : rec.density) com.push_back(d.dot(x) / d.sum());
        return com;
    }
    CVector phase(L);
    for (Eigen::Index x = 0; x < L; ++x) phase[x] = std::polar(1.0, 2.0 * pi * double(x) / double(L));
    double prev = 0.0;
    for (std::size_t n = 0; n < rec.density.size(); ++n) {
        const cplx z = (rec.density[n].cast<cplx>().array() * phase.array()).sum();
        double pos = std::arg(z) * double(L) / (2.0 * pi);
        if (pos < 0.0) pos += double(L);
        if (n > 0) pos = prev + std::remainder(pos - prev, double(L));
        com.push_back(pos);
        prev = pos;
    }
    return com;
}

namespace {

struct LineFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0, rms = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    f.r2 = syy > 0.0 ? 1.0 - ss / syy : 1.0;
    return f;
}

} // namespace

VelocityFit dominant_velocity(const EvolutionRecord& rec, double burn_in) {
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("velocity: burn_in must be in [0, 1)");
    VelocityFit out;
    out.com = center_of_mass(rec);
    const auto first = std::size_t(std::ceil(burn_in * double(rec.times.size() - 1)));
    if (rec.times.size() < first + 20) throw ConfigError("velocity: need at least 20 samples after burn-in");
    std::vector<double> t(rec.times.begin() + std::ptrdiff_t(first), rec.times.end());
    std::vector<double> x(out.com.begin() + std::ptrdiff_t(first), out.com.end());
    const auto f = fit_line(t, x);
    out.v = f.slope / double(rec.params.cell());
    out.r2 = f.r2;
    if (out.r2 < 0.9) out.diagnostic = "unreliable velocity: R^2 below 0.9";
    return out;
}

std::vector<double> velocity_components(const EvolutionRecord& rec, double x0, double min_rel_height) {
    std::vector<double> out;
    if (rec.density.size() < 2) return out;
    const auto& d = rec.density.back();
    const int cell = rec.params.cell();
    const auto L = d.size();
    const Eigen::Index nc = L / cell;
    RVector c = RVector::Zero(nc);
    for (Eigen::Index x = 0; x < nc * cell; ++x) c[x / cell] += d[x];
    // light smoothing over neighbouring cells
    RVector s = RVector::Zero(nc);
    const bool ring = rec.params.boundary == Boundary::PBC;
    for (Eigen::Index m = 0; m < nc; ++m) {
        double acc = 0.0;
        int cnt = 0;
        for (Eigen::Index o = -2; o <= 2; ++o) {
            Eigen::Index j = m + o;
            if (ring) j = (j + nc) % nc;
            if (j < 0 || j >= nc) continue;
            acc += c[j];
            ++cnt;
        }
        s[m] = acc / cnt;
    }
    const double top = s.maxCoeff();
    const double t = rec.times.back();
    const double c0 = x0 / cell;
    for (Eigen::Index m = 0; m < nc; ++m) {
        const double left = (m > 0 || ring) ? s[(m - 1 + nc) % nc] : -1.0;
        const double right = (m + 1 < nc || ring) ? s[(m + 1) % nc] : -1.0;
        if (s[m] >= min_rel_height * top && s[m] > left && s[m] >= right) {
            double disp = double(m) - c0;
            if (ring) disp = std::remainder(disp, double(nc));
            out.push_back(disp / t);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<BandVector> bloch_band_vectors(const ModelParams& p, double k, int n_steps) {
    const double h = 2.0 * pi / 801.0;
    const auto bands = quasienergy_bands(p, {k - h, k, k + h}, n_steps);
    const auto dec = eig(bloch_propagator(p, std::polar(1.0, k), n_steps).matrix, true);
    const double T = p.period();
    std::vector<BandVector> out;
    for (Eigen::Index a = 0; a < bands.bands.cols(); ++a) {
        BandVector b;
        b.eps = bands.bands(1, a);
        b.velocity = bands.velocity(1, a);
        // eigenvector of the matching quasienergy
        Eigen::Index best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < dec.values.size(); ++j) {
            const double d = quasienergy_distance(quasienergy(dec.values[j], T), b.eps, T);
            if (d < dist) {
                dist = d;
                best = j;
            }
        }
        b.u = dec.vectors.col(best);
        out.push_back(std::move(b));
    }
    std::sort(out.begin(), out.end(), [](const BandVector& a, const BandVector& b) { return a.velocity < b.velocity; });
    return out;
}

ImpurityResult impurity_experiment(const ModelParams& p, const InitialState& init, int max_periods, int n_substeps,
                                   int buffer, double margin) {
    if (p.impurities.size() != 1) throw ConfigError("impurity experiment: exactly one impurity required");
    ModelParams free = p;
    free.impurities.clear();
    const auto L = Eigen::Index(p.sites());
    const bool ring = p.boundary == Boundary::PBC;
    const double x_imp = double(p.impurities.front().site);

    Evolver with(p, n_substeps), without(free, n_substeps);
    CVector a = init.build(p), b = a;

    EvolutionRecord probe;
    probe.params = free;
    probe.density.push_back(b.cwiseAbs2());
    probe.times.push_back(0.0);
    const double start = center_of_mass(probe).front();
    double gap = x_imp - start;
    if (ring) gap = std::remainder(gap, double(L));
    const double dir = gap < 0.0 ? -1.0 : 1.0;

    ImpurityResult r;
    const Eigen::Index reach = L / 3;
    auto site = [&](double x) -> Eigen::Index {
        auto i = Eigen::Index(std::lround(x));
        if (ring) i = ((i % L) + L) % L;
        return i;
    };
    for (int n = 1; n <= max_periods; ++n) {
        with.period(a);
        without.period(b);
        const double nb = b.norm();
        a /= nb;
        b /= nb;
        probe.density.push_back(b.cwiseAbs2());
        probe.times.push_back(n * with.period_length());
        const auto com = center_of_mass(probe);
        const double travelled = dir * (com.back() - com.front());
        if (travelled < std::abs(gap) + margin) continue;

        const CVector diff = a - b;
        const double total = a.squaredNorm();
        double refl = 0.0, trans = 0.0;
        for (Eigen::Index o = buffer; o < reach; ++o) {
            const auto back_site = site(x_imp - dir * double(o));
            const auto front_site = site(x_imp + dir * double(o));
            if (back_site >= 0 && back_site < L) refl += std::norm(diff[back_site]);
            if (front_site >= 0 && front_site < L) trans += std::norm(a[front_site]);
        }
        r.reflected = refl / total;
        r.transmitted = trans / total;
        r.measured_period = n;
        r.conclusive = true;
        return r;
    }
    r.diagnostic = "inconclusive: the packet did not pass the impurity within " + std::to_string(max_periods) +
                   " periods";
    return r;
}

DecayEstimate propagator_element(const ModelParams& p, std::size_t a, int n_periods, int n_substeps,
                                 bool sub_period) {
    const std::size_t L = p.sites();
    if (a >= L) throw ConfigError("propagator element: site outside the chain");
    if (p.boundary == Boundary::OBC && (a < L / 4 || a >= L - L / 4))
        throw ConfigError("propagator element: site must be at least L/4 from both edges");
    Evolver ev(p, n_substeps);
    DecayEstimate est;
    est.site = a;
    CVector psi = CVector::Zero(Eigen::Index(L));
    psi[Eigen::Index(a)] = 1.0;
    double log_norm = 0.0;
    auto record = [&](double t, bool strobe) {
        est.times.push_back(t);
        est.log_abs_g.push_back(std::log(std::abs(psi[Eigen::Index(a)])) + log_norm);
        est.stroboscopic.push_back(strobe);
    };
    record(0.0, true);
    const double T = ev.period_length();
    for (int n = 0; n < n_periods; ++n) {
        for (int j = 0; j < n_substeps; ++j) {
            ev.substep(psi, j);
            if (sub_period && j + 1 < n_substeps) record(n * T + (j + 1) * ev.dt(), false);
        }
        log_norm += rescale(psi);
        record((n + 1) * T, true);
    }
    return est;
}

void fit_decay_rate(DecayEstimate& est, double burn_in, double reference) {
    std::vector<double> t, y;
    for (std::size_t i = 0; i < est.times.size(); ++i)
        if (est.stroboscopic[i]) {
            t.push_back(est.times[i]);
            y.push_back(est.log_abs_g[i]);
        }
    const auto first = std::size_t(std::ceil(burn_in * double(t.size() - 1)));
    if (t.size() < first + 30) throw ConfigError("decay fit: need at least 30 stroboscopic samples after burn-in");
    t.erase(t.begin(), t.begin() + std::ptrdiff_t(first));
    y.erase(y.begin(), y.begin() + std::ptrdiff_t(first));
    const auto f = fit_line(t, y);
    est.lambda = f.slope;
    est.t1 = t.front();
    est.t2 = t.back();
    est.residual_rms = f.rms;
    est.reference = reference;
    const double drop = std::abs(y.back() - y.front());
    est.diagnostic.clear();
    if (f.rms > 0.1 * drop) est.diagnostic = "transient too short: residual above 10% of the total drop";
}

std::vector<GammaSweepRow> gamma_sweep(const ModelParams& p, const std::vector<double>& gammas,
                                       const std::optional<InitialState>& init, int n_periods, int n_steps) {
    if (std::find(gammas.begin(), gammas.end(), 0.0) == gammas.end())
        throw ConfigError("gamma sweep: grid must include 0");
    std::vector<GammaSweepRow> rows;
    const double h = 2.0 * pi / 801.0;
    for (double g : gammas) {
        ModelParams q = p;
        q.gamma.assign(q.gamma.size(), 0.0);
        q.gamma[0] = g;
        GammaSweepRow row;
        row.gamma = g;
        const auto bands = quasienergy_bands(q, {-h, 0.0, h}, n_steps);
        for (Eigen::Index a = 0; a < bands.bands.cols(); ++a) {
            row.im_k0.push_back(bands.bands(1, a).imag());
            row.velocity_k0.push_back(bands.velocity(1, a));
        }
        std::sort(row.im_k0.rbegin(), row.im_k0.rend());
        row.split = row.im_k0.front() - row.im_k0.back();
        if (init) row.v_prime = dominant_velocity(evolve(q, *init, n_periods)).v;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> critical_gamma(const std::vector<GammaSweepRow>& rows, double threshold) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) pts.emplace_back(std::abs(r.gamma), r.split);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].second <= threshold) continue;
        if (i == 0) return pts[0].first;
        const auto [g0, s0] = pts[i - 1];
        const auto [g1, s1] = pts[i];
        return g0 + (threshold - s0) * (g1 - g0) / (s1 - s0);
    }
    return std::nullopt;
}

std::vector<FrequencyRow> frequency_direction(const ModelParams& p, const std::vector<double>& omegas,
                                              const InitialState& init, int n_periods, double burn_in) {
    std::vector<FrequencyRow> out;
    for (double w : omegas) {
        if (!(w > 0.0)) throw ConfigError("frequency sweep: omega must be positive");
        ModelParams q = p;
        q.omega = w;
        out.push_back({w, dominant_velocity(evolve(q, init, n_periods), burn_in)});
    }
    return out;
}

BoundaryComparison boundary_independence(const ModelParams& p, const InitialState& init, int max_periods,
                                         int n_substeps, int edge_sites, double arrival) {
    ModelParams po = p, pp = p;
    po.boundary = Boundary::OBC;
    pp.boundary = Boundary::PBC;
    Evolver eo(po, n_substeps), ep(pp, n_substeps);
    CVector a = init.build(pp), b = a;
    const auto L = a.size();
    BoundaryComparison out;
    for (int n = 1; n <= max_periods; ++n) {
        eo.period(a);
        ep.period(b);
        const double nb = b.norm();
        a /= nb;
        b /= nb;
        const RVector db = b.cwiseAbs2();
        if (db.head(edge_sites).sum() + db.tail(edge_sites).sum() >= arrival) break;
        const RVector da = a.cwiseAbs2();
        out.max_difference = std::max(out.max_difference, (da - db).cwiseAbs().maxCoeff());
        out.periods_compared = n;
        (void)L;
    }
    return out;
}

} // namespace floqskin
