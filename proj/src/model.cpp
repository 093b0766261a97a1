#include "floqskin/model.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace floqskin {

Flux Flux::ratio(long p, long q) {
    Flux f;
    f.rational = true;
    f.p = p;
    f.q = q;
    return f;
}

Flux Flux::irrational(double value) {
    Flux f;
    f.rational = false;
    f.real = value;
    return f;
}

namespace {

int default_dissipation_period(double flux) {
    if (!(std::abs(flux) > 0.0)) return 1;
    return std::max(1, int(std::lround(1.0 / std::abs(flux))));
}

bool finite(double x) { return std::isfinite(x); }

} // namespace

void ModelParams::validate() const {
    if (!finite(u) || !finite(v) || !finite(phase_offset))
        throw ConfigError("model: u, v and phase_offset must be finite");
    if (!finite(omega) || omega < 0.0)
        throw ConfigError("model: omega must be finite and >= 0 (got " + std::to_string(omega) + ")");
    if (n_cells < 1)
        throw ConfigError("model: n_cells must be >= 1 (got " + std::to_string(n_cells) + ")");
    for (double g : gamma)
        if (!finite(g)) throw ConfigError("model: gamma entries must be finite");
    if (flux.rational) {
        if (flux.q < 1) throw ConfigError("model: flux denominator q must be >= 1");
        if (std::gcd(std::labs(flux.p), flux.q) != 1)
            throw ConfigError("model: flux p/q must be coprime (got " + std::to_string(flux.p) + "/" +
                              std::to_string(flux.q) + ")");
        if (gamma.size() != std::size_t(flux.q))
            throw ConfigError("model: gamma must have exactly q = " + std::to_string(flux.q) + " entries (got " +
                              std::to_string(gamma.size()) + ")");
        if (dissipation_period != 0 && dissipation_period != flux.q)
            throw ConfigError("model: dissipation_period must equal q for rational flux");
    } else {
        if (!finite(flux.real)) throw ConfigError("model: real flux must be finite");
        if (dissipation_period < 0) throw ConfigError("model: dissipation_period must be >= 0");
        if (gamma.size() != std::size_t(cell()))
            throw ConfigError("model: gamma must have one entry per dissipation period site (" +
                              std::to_string(cell()) + "), got " + std::to_string(gamma.size()));
    }
    const std::size_t L = sites();
    for (const auto& imp : impurities) {
        if (imp.site >= L)
            throw ConfigError("model: impurity site " + std::to_string(imp.site) + " outside [0, " +
                              std::to_string(L) + ")");
        if (!finite(imp.strength)) throw ConfigError("model: impurity strength must be finite");
    }
}

std::size_t ModelParams::sites() const {
    return flux.rational ? std::size_t(flux.q) * std::size_t(n_cells) : std::size_t(n_cells);
}

int ModelParams::cell() const {
    if (flux.rational) return int(flux.q);
    return dissipation_period > 0 ? dissipation_period : default_dissipation_period(flux.real);
}

double ModelParams::period() const { return omega > 0.0 ? 2.0 * pi / omega : 1.0; }

double ModelParams::gamma_at(std::size_t n) const {
    if (gamma.empty()) return 0.0;
    return gamma[n % gamma.size()];
}

ModelParams fig1_params() { return ModelParams{}; }

void to_json(nlohmann::json& j, const ModelParams& p) {
    j = nlohmann::json::object();
    j["u"] = p.u;
    j["v"] = p.v;
    if (p.flux.rational)
        j["flux"] = {{"rational", {p.flux.p, p.flux.q}}};
    else
        j["flux"] = {{"real", p.flux.real}};
    j["phase_offset"] = p.phase_offset;
    j["omega"] = p.omega;
    j["gamma"] = p.gamma;
    j["n_cells"] = p.n_cells;
    j["boundary"] = p.boundary == Boundary::PBC ? "PBC" : "OBC";
    auto imps = nlohmann::json::array();
    for (const auto& imp : p.impurities) imps.push_back({{"site", imp.site}, {"strength", imp.strength}});
    j["impurities"] = imps;
    if (!p.flux.rational) j["dissipation_period"] = p.cell();
}

void from_json(const nlohmann::json& j, ModelParams& p) {
    static const std::set<std::string> known{"u",      "v",       "flux",     "phase_offset", "omega",
                                             "gamma",  "n_cells", "boundary", "impurities",   "dissipation_period"};
    if (!j.is_object()) throw ConfigError("model: expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("model: unknown key '" + key + "'");
    try {
        if (j.contains("u")) p.u = j.at("u").get<double>();
        if (j.contains("v")) p.v = j.at("v").get<double>();
        if (j.contains("phase_offset")) p.phase_offset = j.at("phase_offset").get<double>();
        if (j.contains("omega")) p.omega = j.at("omega").get<double>();
        if (j.contains("n_cells")) p.n_cells = j.at("n_cells").get<int>();
        if (j.contains("dissipation_period")) p.dissipation_period = j.at("dissipation_period").get<int>();
        if (j.contains("flux")) {
            const auto& f = j.at("flux");
            if (f.is_object() && f.size() == 1 && f.contains("rational")) {
                const auto& pq = f.at("rational");
                if (!pq.is_array() || pq.size() != 2) throw ConfigError("model: flux.rational must be [p, q]");
                p.flux = Flux::ratio(pq[0].get<long>(), pq[1].get<long>());
            } else if (f.is_object() && f.size() == 1 && f.contains("real")) {
                p.flux = Flux::irrational(f.at("real").get<double>());
            } else {
                throw ConfigError("model: flux must be {\"rational\": [p, q]} or {\"real\": x}");
            }
        }
        if (j.contains("gamma")) p.gamma = j.at("gamma").get<std::vector<double>>();
        if (j.contains("boundary")) {
            const auto b = j.at("boundary").get<std::string>();
            if (b == "PBC")
                p.boundary = Boundary::PBC;
            else if (b == "OBC")
                p.boundary = Boundary::OBC;
            else
                throw ConfigError("model: boundary must be \"PBC\" or \"OBC\" (got \"" + b + "\")");
        }
        if (j.contains("impurities")) {
            p.impurities.clear();
            for (const auto& item : j.at("impurities")) {
                for (const auto& [key, value] : item.items())
                    if (key != "site" && key != "strength")
                        throw ConfigError("model: unknown impurity key '" + key + "'");
                const auto site = item.at("site").get<long long>();
                if (site < 0) throw ConfigError("model: impurity site must be >= 0");
                p.impurities.push_back({std::size_t(site), item.at("strength").get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

namespace {

double onsite_phase(const ModelParams& p, std::size_t n) {
    if (p.flux.rational) {
        const long q = p.flux.q;
        const long r = ((p.flux.p % q) * long(n % std::size_t(q))) % q;
        return 2.0 * pi * double((r + q) % q) / double(q);
    }
    return 2.0 * pi * p.flux.real * double(n);
}

} // namespace

CVector bloch_onsite(const ModelParams& p, double t) {
    if (!p.flux.rational) throw UnsupportedRepresentation("bloch hamiltonian: irrational flux has no Bloch form");
    const int q = int(p.flux.q);
    CVector d(q);
    for (int n = 0; n < q; ++n)
        d[n] = cplx(p.v * std::cos(p.omega * t + onsite_phase(p, std::size_t(n)) + p.phase_offset),
                    p.gamma_at(std::size_t(n)));
    return d;
}

void fill_bloch_beta(const ModelParams& p, cplx beta, double t, CMatrix& h) {
    if (!p.flux.rational) throw UnsupportedRepresentation("bloch hamiltonian: irrational flux has no Bloch form");
    if (beta == cplx(0.0, 0.0)) throw SingularContinuation("bloch hamiltonian: beta = 0");
    const int q = int(p.flux.q);
    h.setZero(q, q);
    h.diagonal() = bloch_onsite(p, t);
    for (int n = 0; n + 1 < q; ++n) {
        h(n, n + 1) += -p.u;
        h(n + 1, n) += -p.u;
    }
    h(0, q - 1) += -p.u / beta;
    h(q - 1, 0) += -p.u * beta;
}

CMatrix bloch_hamiltonian_beta(const ModelParams& p, cplx beta, double t) {
    CMatrix h;
    fill_bloch_beta(p, beta, t, h);
    return h;
}

CMatrix bloch_hamiltonian(const ModelParams& p, double k, double t) {
    return bloch_hamiltonian_beta(p, std::polar(1.0, k), t);
}

double ChainOperator::norm_bound() const {
    double m = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) m = std::max(m, std::abs(diag[i]));
    return m + 2.0 * std::abs(hop);
}

namespace {

// out[i] = d[i] in[i] - hop (in[i-1] + in[i+1]) on one column.
inline void apply_column(const cplx* d, double hop, bool periodic, std::size_t L, const cplx* in, cplx* out) {
    if (L == 1) {
        out[0] = d[0] * in[0] - (periodic ? 2.0 * hop * in[0] : cplx(0.0));
        return;
    }
    for (std::size_t i = 1; i + 1 < L; ++i) out[i] = d[i] * in[i] - hop * (in[i - 1] + in[i + 1]);
    out[0] = d[0] * in[0] - hop * in[1];
    out[L - 1] = d[L - 1] * in[L - 1] - hop * in[L - 2];
    if (periodic) {
        out[0] -= hop * in[L - 1];
        out[L - 1] -= hop * in[0];
    }
}

} // namespace

void ChainOperator::apply(const CMatrix& in, CMatrix& out) const {
    const std::size_t L = size();
    out.resize(in.rows(), in.cols());
    for (Eigen::Index c = 0; c < in.cols(); ++c)
        apply_column(diag.data(), hop, periodic, L, in.col(c).data(), out.col(c).data());
}

void ChainOperator::apply(const CVector& in, CVector& out) const {
    out.resize(in.size());
    apply_column(diag.data(), hop, periodic, size(), in.data(), out.data());
}

CMatrix ChainOperator::dense() const {
    const auto L = Eigen::Index(size());
    CMatrix h = CMatrix::Zero(L, L);
    for (Eigen::Index i = 0; i < L; ++i) h(i, i) = diag[i];
    for (Eigen::Index i = 0; i + 1 < L; ++i) {
        h(i, i + 1) += -hop;
        h(i + 1, i) += -hop;
    }
    if (periodic) {
        h(0, L - 1) += -hop;
        h(L - 1, 0) += -hop;
    }
    return h;
}

void real_space_diagonal(const ModelParams& p, double t, CVector& diag) {
    const std::size_t L = p.sites();
    diag.resize(Eigen::Index(L));
    for (std::size_t n = 0; n < L; ++n)
        diag[Eigen::Index(n)] =
            cplx(p.v * std::cos(onsite_phase(p, n) + p.omega * t + p.phase_offset), p.gamma_at(n));
    for (const auto& imp : p.impurities) diag[Eigen::Index(imp.site)] += imp.strength;
}

ChainOperator real_space_chain(const ModelParams& p, double t) {
    ChainOperator h;
    real_space_diagonal(p, t, h.diag);
    h.hop = p.u;
    h.periodic = p.boundary == Boundary::PBC;
    return h;
}

CMatrix real_space_hamiltonian(const ModelParams& p, double t) { return real_space_chain(p, t).dense(); }

} // namespace floqskin
