#include "floqskin/harness.hpp"

#include "floqskin/csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace floqskin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Knob {
    json def;
    double lo = -inf;
    double hi = inf;
    bool integer = false;
    std::vector<std::string> choices;
};

using KnobTable = std::map<std::string, Knob>;

Knob num(double def, double lo, double hi) { return {def, lo, hi, false, {}}; }
Knob integer(long long def, double lo, double hi) { return {def, lo, hi, true, {}}; }
Knob flag(bool def) { return {def, -inf, inf, false, {}}; }
Knob choice(const std::string& def, std::vector<std::string> c) { return {def, -inf, inf, false, std::move(c)}; }
Knob init_knob() { return {json{{"kind", "delta"}}, -inf, inf, false, {}}; }

const std::map<std::string, KnobTable>& knob_tables() {
    static const std::map<std::string, KnobTable> t = [] {
        std::map<std::string, KnobTable> m;
        const auto steps = integer(default_n_steps, 20, 20000);
        m["bands"] = {{"n_k", integer(801, 3, 200001)}, {"n_steps", steps}, {"check", flag(true)}};
        m["spectrum"] = {{"n_k", integer(801, 16, 200001)}, {"n_steps", steps}, {"check", flag(true)}};
        m["skin"] = {{"n_steps", steps},
                     {"gap_factor", num(2.0, 0.0, 1e6)},
                     {"edge_mass", num(0.8, 0.0, 1.0)},
                     {"filter", choice("dominant", {"dominant", "bulk", "all"})}};
        m["gbz"] = {{"n_steps", steps},
                    {"kappa_min", num(-0.6, -5.0, 5.0)},
                    {"kappa_max", num(0.6, -5.0, 5.0)},
                    {"n_kappa", integer(121, 3, 100000)},
                    {"n_k", integer(721, 16, 100000)},
                    {"match_tol", num(2e-3, 0.0, 1.0)},
                    {"half", choice("all", {"all", "positive", "negative"})},
                    {"verify_steps", integer(400, 0, 20000)}};
        m["evolve"] = {{"init", init_knob()},
                       {"n_periods", integer(300, 1, 1e6)},
                       {"n_substeps", integer(default_substeps, 20, 1e5)},
                       {"stride", integer(1, 1, 1e6)},
                       {"burn_in", num(0.3, 0.0, 0.99)},
                       {"check", flag(true)}};
        m["impurity"] = {{"init", init_knob()},
                         {"site", integer(-1, -1, 1e9)},
                         {"strength", num(0.1, -1e6, 1e6)},
                         {"max_periods", integer(600, 1, 1e6)},
                         {"n_substeps", integer(default_substeps, 20, 1e5)},
                         {"buffer", integer(5, 0, 1e6)},
                         {"margin", num(15.0, 0.0, 1e6)}};
        m["decay"] = {{"site", integer(-1, -1, 1e9)},
                      {"n_periods", integer(300, 1, 1e6)},
                      {"n_substeps", integer(default_substeps, 20, 1e5)},
                      {"sub_period", flag(true)},
                      {"burn_in", num(0.3, 0.0, 0.99)}};
        m["gamma-sweep"] = {{"gamma_min", num(-1.2, -100.0, 0.0)},
                            {"n_gamma", integer(121, 2, 100000)},
                            {"dynamics", flag(false)},
                            {"init", init_knob()},
                            {"n_periods", integer(100, 1, 1e6)},
                            {"threshold", num(5e-3, 0.0, 1e6)},
                            {"n_steps", steps}};
        m["freq-sweep"] = {{"omegas", {json::array({0.4, 1.2}), -inf, inf, false, {}}},
                           {"init", init_knob()},
                           {"n_periods", integer(300, 1, 1e6)},
                           {"burn_in", num(0.3, 0.0, 0.99)}};
        m["phi-scan"] = {{"n_phi", integer(201, 2, 100000)}};
        m["incommensurate"] = {{"n_steps", integer(100, 20, 20000)}, {"side_threshold", num(0.25, 0.0, 1.0)}};
        m["symmetry-check"] = {{"n_samples", integer(16, 1, 100000)}, {"n_steps", steps}};
        return m;
    }();
    return t;
}

const KnobTable& table_for(const std::string& experiment) {
    const auto& t = knob_tables();
    const auto it = t.find(experiment);
    if (it == t.end()) {
        if (experiment.empty()) throw ConfigError("config: experiment name is empty");
        throw ConfigError("config: unknown experiment '" + experiment + "'");
    }
    return it->second;
}

/// Parsed initial-state knob; x0 < 0 means the chain center.
struct InitSpec {
    std::string kind = "delta";
    double x0 = -1.0;
    double sigma = 15.0;
    json u_vec = "uniform";
};

InitSpec parse_init(const json& j) {
    if (!j.is_object()) throw ConfigError("knob 'init' must be an object");
    InitSpec s;
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") {
            s.kind = value.get<std::string>();
            if (s.kind != "delta" && s.kind != "gaussian")
                throw ConfigError("knob 'init.kind' must be \"delta\" or \"gaussian\"");
        } else if (key == "x0") {
            s.x0 = value.is_null() ? -1.0 : value.get<double>();
        } else if (key == "sigma") {
            s.sigma = value.get<double>();
            if (!(s.sigma > 0.0)) throw ConfigError("knob 'init.sigma' must be positive");
        } else if (key == "u_vec") {
            if (!(value == "uniform" || value == "random" || value.is_number_integer()))
                throw ConfigError("knob 'init.u_vec' must be \"uniform\", \"random\" or a band index");
            s.u_vec = value;
        } else {
            throw ConfigError("knob 'init': unknown key '" + key + "'");
        }
    }
    return s;
}

InitialState build_init(const InitSpec& s, const ModelParams& p, std::uint64_t seed) {
    const double L = double(p.sites());
    const double x0 = s.x0 < 0.0 ? std::floor(L / 2.0) : s.x0;
    if (x0 >= L) throw ConfigError("knob 'init.x0' outside [0, L)");
    if (s.kind == "delta") return InitialState::delta(x0);
    std::vector<cplx> u;
    if (s.u_vec == "random") {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        for (int i = 0; i < p.cell(); ++i) u.emplace_back(g(rng), g(rng));
    } else if (s.u_vec.is_number_integer()) {
        const auto bands = bloch_band_vectors(p, 0.0);
        const auto b = s.u_vec.get<long long>();
        if (b < 0 || b >= (long long)bands.size()) throw ConfigError("knob 'init.u_vec' band index out of range");
        const auto& v = bands[std::size_t(b)].u;
        u.assign(v.data(), v.data() + v.size());
    }
    return InitialState::gaussian(x0, s.sigma, u);
}

std::size_t site_or(long long site, std::size_t fallback) { return site < 0 ? fallback : std::size_t(site); }

std::string stem(const ExperimentConfig& cfg, const std::string& name) {
    return (cfg.tag.empty() ? name : cfg.tag + "_" + name) + ".csv";
}

struct Output {
    fs::path dir;
    const ExperimentConfig& cfg;
    std::vector<std::string> files;

    CsvWriter open(const std::string& name, const std::vector<std::string>& header) {
        const auto file = stem(cfg, name);
        files.push_back(file);
        return CsvWriter(dir / file, header);
    }
};

void write_evolution(Output& o, const EvolutionRecord& rec, const VelocityFit& fit) {
    auto ev = o.open("evolution", {"t", "site", "density"});
    for (std::size_t n = 0; n < rec.times.size(); ++n)
        for (Eigen::Index x = 0; x < rec.density[n].size(); ++x)
            ev.cell(rec.times[n]).cell((long long)x).cell(rec.density[n][x]).end_row();
    auto nr = o.open("norms", {"t", "log_norm", "center_of_mass"});
    for (std::size_t n = 0; n < rec.times.size(); ++n)
        nr.cell(rec.times[n]).cell(rec.log_norms[n]).cell(fit.com[n]).end_row();
    auto v = o.open("velocity", {"v", "r2", "diagnostic"});
    v.cell(fit.v).cell(fit.r2).cell(fit.diagnostic.empty() ? std::string("ok") : fit.diagnostic).end_row();
}

CVector select_energies(const SpectrumResult& s, const std::vector<std::size_t>& idx, const std::string& half) {
    std::vector<cplx> e;
    for (auto i : idx) {
        const cplx z = s.eigenvalues[Eigen::Index(i)];
        if (half == "positive" && z.real() <= 0.0) continue;
        if (half == "negative" && z.real() >= 0.0) continue;
        e.push_back(z);
    }
    return Eigen::Map<CVector>(e.data(), Eigen::Index(e.size()));
}

void run_bands(const ExperimentConfig& cfg, Output& o, std::map<std::string, std::string>& conv) {
    const auto& k = cfg.knobs;
    const int n_steps = k["n_steps"];
    const auto b = quasienergy_bands(cfg.model, uniform_k_grid(k["n_k"]), n_steps);
    auto w = o.open("bands", {"k", "band", "re", "im", "velocity"});
    for (Eigen::Index i = 0; i < b.bands.rows(); ++i)
        for (Eigen::Index a = 0; a < b.bands.cols(); ++a)
            w.cell(b.k[std::size_t(i)]).cell((long long)a).cell(b.bands(i, a).real()).cell(b.bands(i, a).imag())
                .cell(b.velocity(i, a)).end_row();
    if (k["check"]) {
        const auto T = cfg.model.period();
        const auto e1 = propagator_quasienergies(bloch_propagator(cfg.model, 1.0, n_steps).matrix, T);
        const auto e2 = propagator_quasienergies(bloch_propagator(cfg.model, 1.0, 2 * n_steps).matrix, T);
        conv["bands"] = "k=0 quasienergy change on doubling n_steps: " + format_number(hausdorff_quasienergy(e1, e2, T));
    }
    for (const auto& warn : b.warnings) conv["bands: tracking"] += warn + "; ";
}

void run_spectrum(const ExperimentConfig& cfg, Output& o, std::map<std::string, std::string>& conv) {
    const auto& k = cfg.knobs;
    const int n_steps = k["n_steps"];
    for (auto bc : {Boundary::PBC, Boundary::OBC}) {
        const auto s = realspace_floquet_spectrum(cfg.model, bc, n_steps, false);
        auto w = o.open(bc == Boundary::PBC ? "spectrum_pbc" : "spectrum_obc", {"index", "re", "im"});
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
            w.cell((long long)i).cell(s.eigenvalues[i].real()).cell(s.eigenvalues[i].imag()).end_row();
        if (bc == Boundary::OBC && k["check"]) {
            const auto s2 = realspace_floquet_spectrum(cfg.model, bc, 2 * n_steps, false);
            conv["spectrum"] = "OBC spectrum change on doubling n_steps: " +
                               format_number(hausdorff_quasienergy(s.eigenvalues, s2.eigenvalues, s.period));
        }
    }
    if (!cfg.model.flux.rational) return;
    const auto loops = pbc_loops(cfg.model, k["n_k"], n_steps);
    const auto e = loops.quasienergies();
    const auto q = loops.lambda.cols();
    auto w = o.open("pbc_loops", {"k", "band", "re", "im"});
    for (Eigen::Index i = 0; i < loops.lambda.rows(); ++i)
        for (Eigen::Index a = 0; a < q; ++a)
            w.cell(loops.k[std::size_t(i)]).cell((long long)a).cell(e[i * q + a].real()).cell(e[i * q + a].imag())
                .end_row();
}

void run_skin(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    ModelParams p = cfg.model;
    p.boundary = Boundary::OBC;
    const auto s = realspace_floquet_spectrum(p, Boundary::OBC, k["n_steps"], true);
    EdgeStateOptions opt;
    opt.gap_factor = k["gap_factor"];
    opt.edge_mass = k["edge_mass"];
    const auto edges = detect_edge_states(s, opt);
    const std::string filter = k["filter"];
    std::vector<std::size_t> sel;
    if (filter == "dominant")
        sel = dominant_band(s, opt);
    else if (filter == "bulk")
        sel = complement(s.size(), edges);
    else
        sel = complement(s.size(), {});
    const auto prof = skin_weight(s, sel, filter);
    auto w = o.open("skin", {"x", "W"});
    for (Eigen::Index x = 0; x < prof.W.size(); ++x) w.cell((long long)x).cell(prof.W[x]).end_row();
    auto e = o.open("edge_states", {"index", "re", "im", "side_mass"});
    for (auto i : edges)
        e.cell((long long)i).cell(s.eigenvalues[Eigen::Index(i)].real()).cell(s.eigenvalues[Eigen::Index(i)].imag())
            .cell(side_mass(s, i)).end_row();
    auto sm = o.open("skin_summary", {"filter", "n_selected", "left_mass_fraction", "n_edge_states"});
    sm.cell(filter).cell((long long)prof.n_selected).cell(prof.left_mass_fraction).cell((long long)edges.size()).end_row();
}

void run_gbz(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    GBZGrid grid;
    grid.kappa_min = k["kappa_min"];
    grid.kappa_max = k["kappa_max"];
    grid.n_kappa = k["n_kappa"];
    grid.n_k = k["n_k"];
    grid.match_tol = k["match_tol"];
    grid.n_steps = k["n_steps"];
    grid.validate();
    ModelParams p = cfg.model;
    p.boundary = Boundary::OBC;
    const auto s = realspace_floquet_spectrum(p, Boundary::OBC, grid.n_steps, true);
    const auto dom = dominant_band(s);
    const auto energies = select_energies(s, dom, k["half"]);
    if (energies.size() == 0) throw ConfigError("knob 'half' leaves no energies in the dominant band");
    const auto scan = circle_scan(p, grid);
    const auto range = radial_range(scan, select_energies(s, dom, "all"));
    auto g = gbz_circle_scan(p, scan, energies);
    classify_features(g, energies, s.period);
    auto w = o.open("gbz", {"energy_re", "energy_im", "beta_re", "beta_im", "abs_beta", "kappa", "tag"});
    for (const auto& pt : g.points)
        w.cell(pt.energy.real()).cell(pt.energy.imag()).cell(pt.beta.real()).cell(pt.beta.imag())
            .cell(std::abs(pt.beta)).cell(pt.kappa).cell(std::string(feature_name(pt.tag))).end_row();
    const int vs = k["verify_steps"];
    auto sm = o.open("gbz_summary", {"n_points", "r_min", "r_max", "direction", "range_r_min", "range_r_max",
                                     "range_direction", "saddle_density_ratio", "verify_residual"});
    sm.cell((long long)g.points.size()).cell(g.r_min).cell(g.r_max)
        .cell(std::string(direction_name(direction_from_range(g.r_min, g.r_max))))
        .cell(range.r_min).cell(range.r_max).cell(std::string(direction_name(range.direction)))
        .cell(g.saddle_density_ratio).cell(vs > 0 ? verify_points(p, g, vs) : std::nan(""))
        .end_row();
}

void run_evolve(const ExperimentConfig& cfg, Output& o, std::map<std::string, std::string>& conv) {
    const auto& k = cfg.knobs;
    const auto init = build_init(parse_init(k["init"]), cfg.model, cfg.seed);
    const int sub = k["n_substeps"];
    const auto rec = evolve(cfg.model, init, k["n_periods"], sub, k["stride"]);
    const auto fit = dominant_velocity(rec, k["burn_in"]);
    write_evolution(o, rec, fit);
    if (k["check"]) {
        const auto fine = evolve(cfg.model, init, k["n_periods"], 2 * sub, k["stride"]);
        conv["evolve"] = "final density change on halving dt: " +
                         format_number((fine.density.back() - rec.density.back()).cwiseAbs().maxCoeff());
    }
}

void run_impurity(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    ModelParams p = cfg.model;
    const auto site = site_or(k["site"], p.sites() / 3);
    p.impurities = {{site, k["strength"]}};
    p.validate();
    const auto init = build_init(parse_init(k["init"]), p, cfg.seed);
    const auto r = impurity_experiment(p, init, k["max_periods"], k["n_substeps"], k["buffer"], k["margin"]);
    auto w = o.open("impurity", {"site", "strength", "reflected", "transmitted", "period", "conclusive", "diagnostic"});
    w.cell((long long)site).cell(double(k["strength"])).cell(r.reflected).cell(r.transmitted)
        .cell((long long)r.measured_period).cell((long long)r.conclusive)
        .cell(r.diagnostic.empty() ? std::string("ok") : r.diagnostic).end_row();
}

double max_obc_im(const ModelParams& p) {
    ModelParams q = p;
    q.boundary = Boundary::OBC;
    const auto s = realspace_floquet_spectrum(q, Boundary::OBC, default_n_steps, false);
    return s.eigenvalues.imag().maxCoeff();
}

void run_decay(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    const auto site = site_or(k["site"], cfg.model.sites() / 2);
    auto est = propagator_element(cfg.model, site, k["n_periods"], k["n_substeps"], k["sub_period"]);
    fit_decay_rate(est, k["burn_in"], max_obc_im(cfg.model));
    auto w = o.open("decay", {"t", "log_abs_G", "stroboscopic"});
    for (std::size_t i = 0; i < est.times.size(); ++i)
        w.cell(est.times[i]).cell(est.log_abs_g[i]).cell((long long)est.stroboscopic[i]).end_row();
    auto f = o.open("decay_fit", {"site", "lambda", "t1", "t2", "residual_rms", "reference_im", "diagnostic"});
    f.cell((long long)site).cell(est.lambda).cell(est.t1).cell(est.t2).cell(est.residual_rms).cell(est.reference)
        .cell(est.diagnostic.empty() ? std::string("ok") : est.diagnostic).end_row();
}

void run_gamma_sweep(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    const int n = k["n_gamma"];
    const double gmin = k["gamma_min"];
    std::vector<double> gammas;
    for (int i = 0; i < n; ++i) gammas.push_back(gmin * i / (n - 1));
    std::optional<InitialState> init;
    if (k["dynamics"]) init = build_init(parse_init(k["init"]), cfg.model, cfg.seed);
    const auto rows = gamma_sweep(cfg.model, gammas, init, k["n_periods"], k["n_steps"]);
    const auto q = rows.front().im_k0.size();
    std::vector<std::string> header{"gamma"};
    for (std::size_t a = 0; a < q; ++a) header.push_back("im_" + std::to_string(a));
    for (std::size_t a = 0; a < q; ++a) header.push_back("velocity_" + std::to_string(a));
    header.insert(header.end(), {"split", "v_prime"});
    auto w = o.open("gamma_sweep", header);
    for (const auto& r : rows) {
        w.cell(r.gamma);
        for (double x : r.im_k0) w.cell(x);
        for (double x : r.velocity_k0) w.cell(x);
        w.cell(r.split).cell(r.v_prime ? *r.v_prime : std::nan("")).end_row();
    }
    const auto gc = critical_gamma(rows, k["threshold"]);
    auto s = o.open("gamma_critical", {"threshold", "gamma_c"});
    s.cell(double(k["threshold"])).cell(gc ? -*gc : std::nan("")).end_row();
}

void run_freq_sweep(const ExperimentConfig& cfg, Output& o) {
    const auto& k = cfg.knobs;
    const auto omegas = k["omegas"].get<std::vector<double>>();
    const auto init = build_init(parse_init(k["init"]), cfg.model, cfg.seed);
    const auto rows = frequency_direction(cfg.model, omegas, init, k["n_periods"], k["burn_in"]);
    auto w = o.open("freq_sweep", {"omega", "v_prime", "r2"});
    for (const auto& r : rows) w.cell(r.omega).cell(r.fit.v).cell(r.fit.r2).end_row();
}

void run_phi_scan(const ExperimentConfig& cfg, Output& o) {
    const int n = cfg.knobs["n_phi"];
    std::vector<double> phis;
    for (int i = 0; i < n; ++i) phis.push_back(2.0 * pi * i / (n - 1));
    ModelParams p = cfg.model;
    p.boundary = Boundary::OBC;
    const auto spectra = static_phi_scan(p, phis);
    auto w = o.open("phi_scan", {"phase_offset", "index", "re", "im"});
    for (std::size_t i = 0; i < spectra.size(); ++i)
        for (Eigen::Index j = 0; j < spectra[i].size(); ++j)
            w.cell(phis[i]).cell((long long)j).cell(spectra[i][j].real()).cell(spectra[i][j].imag()).end_row();
}

void run_incommensurate(const ExperimentConfig& cfg, Output& o) {
    const auto r = incommensurate_near_half(cfg.model, cfg.knobs["n_steps"], cfg.knobs["side_threshold"]);
    auto w = o.open("incommensurate", {"index", "re", "im", "side", "band"});
    for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i)
        w.cell((long long)i).cell(r.eigenvalues[i].real()).cell(r.eigenvalues[i].imag()).cell(r.side[i])
            .cell((long long)r.band[std::size_t(i)]).end_row();
    auto s = o.open("incommensurate_summary", {"deviation", "delta", "delta_E", "gap_I_III", "side_I", "side_II",
                                               "count_I", "count_II", "count_III", "n_min", "valley_spacing"});
    s.cell(r.deviation).cell(r.delta).cell(r.delta_E).cell(r.gap_I_III).cell(r.side_I).cell(r.side_II)
        .cell((long long)r.count[0]).cell((long long)r.count[1]).cell((long long)r.count[2])
        .cell((long long)r.n_min).cell(r.valley_spacing).end_row();
}

void run_symmetry(const ExperimentConfig& cfg, Output& o) {
    const int n_steps = cfg.knobs["n_steps"];
    if (n_steps % 2) throw ConfigError("knob 'n_steps' must be even for the half-period operator");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ud(-pi, pi);
    std::vector<double> ks(std::size_t(int(cfg.knobs["n_samples"])));
    for (auto& x : ks) x = ud(rng);
    std::vector<SymmetryReport> reports{check_hidden_symmetry(cfg.model, ks, n_steps),
                                        check_trace_identity(cfg.model, ks, n_steps)};
    if (cfg.model.flux.rational && cfg.model.flux.q == 2) reports.push_back(check_q2_reciprocity(cfg.model, ks, n_steps));
    auto w = o.open("symmetry", {"relation", "max_deviation", "spectral_deviation"});
    for (const auto& r : reports) w.cell(r.relation).cell(r.max_deviation).cell(r.spectral_deviation).end_row();
}

json preset_model(const json& changes) {
    json m = fig1_params();
    for (const auto& [key, value] : changes.items()) m[key] = value;
    return m;
}

ExperimentConfig step(const std::string& experiment, const std::string& tag, const json& model_changes,
                      const json& knobs = json::object()) {
    return config_from_json({{"experiment", experiment}, {"tag", tag}, {"model", preset_model(model_changes)},
                             {"knobs", knobs}});
}

std::string evolution_plot(const std::string& tag, const std::string& title) {
    return "set title '" + title + "'\nset xlabel 'site'\nset ylabel 't'\nset view map\n"
           "splot '" + tag + "_evolution.csv' skip 1 using 2:1:3 with image notitle\npause -1\n";
}

} // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [key, value] : knob_tables()) n.push_back(key);
        return n;
    }();
    return names;
}

json default_knobs(const std::string& experiment) {
    json k = json::object();
    for (const auto& [name, knob] : table_for(experiment)) k[name] = knob.def;
    return k;
}

void ExperimentConfig::validate() {
    const auto& table = table_for(experiment);
    model.validate();
    if (!knobs.is_object()) throw ConfigError(experiment + ": knobs must be an object");
    for (const auto& [name, value] : knobs.items())
        if (!table.count(name)) throw ConfigError(experiment + ": unknown knob '" + name + "'");
    for (const auto& [name, knob] : table) {
        if (!knobs.contains(name)) {
            knobs[name] = knob.def;
            continue;
        }
        const auto& v = knobs[name];
        const std::string where = experiment + ": knob '" + name + "'";
        if (knob.def.is_boolean()) {
            if (!v.is_boolean()) throw ConfigError(where + " must be true or false");
        } else if (!knob.choices.empty()) {
            if (!v.is_string() || std::find(knob.choices.begin(), knob.choices.end(), v.get<std::string>()) ==
                                      knob.choices.end())
                throw ConfigError(where + " has an unsupported value " + v.dump());
        } else if (knob.def.is_number()) {
            if (!v.is_number()) throw ConfigError(where + " must be a number");
            if (knob.integer && !v.is_number_integer()) throw ConfigError(where + " must be an integer");
            const double x = v.get<double>();
            if (!(x >= knob.lo && x <= knob.hi))
                throw ConfigError(where + " = " + v.dump() + " outside [" + format_number(knob.lo) + ", " +
                                  format_number(knob.hi) + "]");
        } else if (knob.def.is_array()) {
            if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a non-empty array");
            for (const auto& x : v)
                if (!x.is_number() || !(x.get<double>() > 0.0))
                    throw ConfigError(where + " entries must be positive numbers");
        }
    }
    if (knobs.contains("init")) {
        const auto s = parse_init(knobs["init"]);
        if (s.x0 >= double(model.sites())) throw ConfigError(experiment + ": knob 'init.x0' outside [0, L)");
    }
    for (const char* key : {"site"})
        if (knobs.contains(key) && knobs[key].get<long long>() >= (long long)model.sites())
            throw ConfigError(experiment + ": knob 'site' outside [0, L)");
    if (experiment == "gbz" && !(knobs["kappa_min"].get<double>() < knobs["kappa_max"].get<double>()))
        throw ConfigError("gbz: knob 'kappa_min' must be below 'kappa_max'");
    const bool needs_bloch = experiment == "bands" || experiment == "gbz" || experiment == "gamma-sweep" ||
                             experiment == "symmetry-check";
    if (needs_bloch && !model.flux.rational)
        throw UnsupportedRepresentation(experiment + ": needs rational flux (no Bloch form otherwise)");
    if (experiment == "phi-scan" && model.omega != 0.0) throw WrongModel("phi-scan: model.omega must be 0");
    if ((experiment == "evolve" || experiment == "impurity" || experiment == "decay" || experiment == "freq-sweep" ||
         experiment == "spectrum" || experiment == "skin") &&
        model.sites() > default_dense_cap)
        throw ConfigError(experiment + ": model has " + std::to_string(model.sites()) + " sites, above the cap " +
                          std::to_string(default_dense_cap));
}

json ExperimentConfig::to_json() const {
    json j{{"experiment", experiment}, {"model", model}, {"knobs", knobs}, {"seed", seed}};
    if (!tag.empty()) j["tag"] = tag;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const std::set<std::string> known{"experiment", "model", "knobs", "seed", "tag"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    ExperimentConfig c;
    try {
        c.experiment = j.value("experiment", std::string());
        if (j.contains("model")) c.model = j.at("model").get<ModelParams>();
        if (j.contains("knobs")) c.knobs = j.at("knobs");
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("tag")) c.tag = j.at("tag").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must be key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

const std::vector<Preset>& list_presets() {
    static const std::vector<Preset> presets = [] {
        std::vector<Preset> v;
        const json lossless{{"gamma", {0.0, 0.0, 0.0}}};
        const json gauss{{"init", {{"kind", "gaussian"}, {"sigma", 15.0}}}};
        const json delta{{"init", {{"kind", "delta"}}}};
        v.push_back({"fig1c", "Gaussian packet without loss",
                     {step("evolve", "fig1c", lossless, gauss)}, evolution_plot("fig1c", "Gaussian, no loss")});
        v.push_back({"fig1d", "delta packet without loss",
                     {step("evolve", "fig1d", lossless, delta)}, evolution_plot("fig1d", "delta, no loss")});
        v.push_back({"fig1e", "Gaussian packet with loss, renormalized",
                     {step("evolve", "fig1e", json::object(), gauss)}, evolution_plot("fig1e", "Gaussian, loss")});
        v.push_back({"fig1f", "delta packet with loss, renormalized",
                     {step("evolve", "fig1f", json::object(), delta)}, evolution_plot("fig1f", "delta, loss")});
        v.push_back({"fig2", "bands, PBC/OBC spectra, skin weight and GBZ",
                     {step("bands", "fig2", json::object()), step("spectrum", "fig2", json::object()),
                      step("skin", "fig2", {{"boundary", "OBC"}}),
                      step("gbz", "fig2", {{"boundary", "OBC"}}, {{"half", "positive"}})},
                     "set multiplot layout 2,2\n"
                     "plot 'fig2_bands.csv' skip 1 using 1:3 with dots title 'Re', '' skip 1 using 1:4 with dots title 'Im'\n"
                     "plot 'fig2_spectrum_pbc.csv' skip 1 using 2:3 with dots title 'PBC', "
                     "'fig2_spectrum_obc.csv' skip 1 using 2:3 with points pt 7 ps 0.3 title 'OBC'\n"
                     "plot 'fig2_skin.csv' skip 1 using 1:2 with lines title 'W(x)'\n"
                     "set size square\nset parametric\n"
                     "plot [0:2*pi] cos(t),sin(t) title 'BZ', 'fig2_gbz.csv' skip 1 using 3:4 with points pt 7 ps 0.3 "
                     "title 'GBZ'\nunset multiplot\npause -1\n"});
        v.push_back({"fig3", "bulk propagator decay and OBC spectrum",
                     {step("decay", "fig3", json::object()), step("spectrum", "fig3", json::object(), {{"check", false}})},
                     "set multiplot layout 1,2\n"
                     "plot 'fig3_decay.csv' skip 1 using 1:2 with lines title 'log|G_aa|'\n"
                     "plot 'fig3_spectrum_obc.csv' skip 1 using 2:3 with points pt 7 ps 0.3 title 'OBC', "
                     "'fig3_spectrum_pbc.csv' skip 1 using 2:3 with dots title 'PBC'\nunset multiplot\npause -1\n"});
        v.push_back({"figS0", "static phase scan, static bands, driven bands",
                     {step("phi-scan", "figS0", {{"omega", 0.0}, {"gamma", {0.0, 0.0, 0.0}}, {"boundary", "OBC"}}),
                      step("bands", "figS0_static", {{"omega", 0.0}, {"gamma", {0.0, 0.0, 0.0}}}),
                      step("bands", "figS0_driven", lossless)},
                     "set multiplot layout 1,3\n"
                     "plot 'figS0_phi_scan.csv' skip 1 using 1:3 with dots notitle\n"
                     "plot 'figS0_static_bands.csv' skip 1 using 1:3 with dots notitle\n"
                     "plot 'figS0_driven_bands.csv' skip 1 using 1:3 with dots notitle\nunset multiplot\npause -1\n"});
        const json random_gauss{{"init", {{"kind", "gaussian"}, {"sigma", 15.0}, {"u_vec", "random"}}}};
        Preset s2{"figS2", "loss sweep: k=0 bands and packets", {step("gamma-sweep", "figS2", json::object())}, {}};
        for (double g : {0.0, -0.2, -0.6, -1.2}) {
            const std::string tag = "figS2_g" + format_number(-g);
            s2.steps.push_back(step("evolve", tag, {{"gamma", {g, 0.0, 0.0}}}, random_gauss));
        }
        s2.plot_script = "set multiplot layout 1,2\n"
                         "plot for [c=5:7] 'figS2_gamma_sweep.csv' skip 1 using 1:c with lines notitle\n"
                         "plot for [c=2:4] 'figS2_gamma_sweep.csv' skip 1 using 1:c with lines notitle\n"
                         "unset multiplot\npause -1\n";
        v.push_back(std::move(s2));
        v.push_back({"figS3", "commensurate and nearby incommensurate drift",
                     {step("evolve", "figS3_comm", json::object(), delta),
                      step("evolve", "figS3_incomm", {{"flux", {{"real", std::sqrt(2.0) / 1.415 / 3.0}}}, {"n_cells", 300},
                                                      {"dissipation_period", 3}}, delta)},
                     evolution_plot("figS3_comm", "commensurate") + evolution_plot("figS3_incomm", "incommensurate")});
        Preset half{"incomm-half", "flux near 1/2: band pairing and interference", {}, {}};
        for (double d : {10000.0, 3000.0, 1000.0}) {
            const std::string tag = "incomm_half_" + format_number(d);
            half.steps.push_back(step("incommensurate", tag,
                                      {{"flux", {{"real", 0.5 - pi / d}}}, {"n_cells", 300}, {"gamma", {-1.2, 0.0}},
                                       {"dissipation_period", 2}, {"boundary", "OBC"}}));
        }
        half.plot_script = "plot 'incomm_half_1000_incommensurate.csv' skip 1 using 2:3:5 with points pt 7 ps 0.4 "
                           "palette notitle\npause -1\n";
        v.push_back(std::move(half));
        v.push_back({"figR1", "drive-frequency control of the direction",
                     {step("freq-sweep", "figR1", json::object(), {{"omegas", {0.4, 1.2}}}),
                      step("evolve", "figR1_w0.4", json::object(), delta),
                      step("evolve", "figR1_w1.2", {{"omega", 1.2}}, delta)},
                     evolution_plot("figR1_w0.4", "omega 0.4") + evolution_plot("figR1_w1.2", "omega 1.2")});
        return v;
    }();
    return presets;
}

const Preset* find_preset(const std::string& name) {
    for (const auto& p : list_presets())
        if (p.name == name) return &p;
    return nullptr;
}

json RunManifest::to_json() const {
    return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"wall_clock_seconds", wall_clock},
            {"files", files}, {"convergence", convergence}, {"config", config}};
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const fs::path& out,
                                        std::map<std::string, std::string>& conv) {
    Output o{out, cfg, {}};
    const auto& e = cfg.experiment;
    try {
        if (e == "bands") run_bands(cfg, o, conv);
        else if (e == "spectrum") run_spectrum(cfg, o, conv);
        else if (e == "skin") run_skin(cfg, o);
        else if (e == "gbz") run_gbz(cfg, o);
        else if (e == "evolve") run_evolve(cfg, o, conv);
        else if (e == "impurity") run_impurity(cfg, o);
        else if (e == "decay") run_decay(cfg, o);
        else if (e == "gamma-sweep") run_gamma_sweep(cfg, o);
        else if (e == "freq-sweep") run_freq_sweep(cfg, o);
        else if (e == "phi-scan") run_phi_scan(cfg, o);
        else if (e == "incommensurate") run_incommensurate(cfg, o);
        else if (e == "symmetry-check") run_symmetry(cfg, o);
        else throw ConfigError("config: unknown experiment '" + e + "'");
    } catch (const ConfigError& err) {
        throw ConfigError(e + ": " + err.what());
    } catch (const NumericalError& err) {
        throw NumericalError(e + ": " + err.what());
    }
    return o.files;
}

RunManifest run(const std::vector<ExperimentConfig>& steps, const fs::path& out, const std::string& plot_script,
                const std::string& plot_name) {
    if (steps.empty()) throw ConfigError("run: nothing to do");
    if (fs::exists(out) && !fs::is_empty(out)) throw ConfigError("run: output directory " + out.string() + " is not empty");
    fs::create_directories(out);
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.config = json::array();
    for (const auto& s : steps) m.config.push_back(s.to_json());
    m.config_hash = config_hash(m.config);
    for (const auto& s : steps) {
        const auto files = run_experiment(s, out, m.convergence);
        m.files.insert(m.files.end(), files.begin(), files.end());
    }
    if (!plot_script.empty()) {
        const auto name = (plot_name.empty() ? std::string("plot") : plot_name) + ".gp";
        std::ofstream(out / name) << plot_script;
        m.files.push_back(name);
    }
    m.files.push_back("manifest.json");
    std::sort(m.files.begin(), m.files.end());
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(out / "manifest.json") << m.to_json().dump(2) << '\n';
    return m;
}

} // namespace floqskin
