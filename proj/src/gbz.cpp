#include "floqskin/gbz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace floqskin {

void GBZGrid::validate() const {
    if (!(kappa_min < 0.0 && kappa_max > 0.0)) throw ConfigError("gbz: kappa grid must bracket 0");
    if (n_kappa < 3) throw ConfigError("gbz: n_kappa must be >= 3");
    if (n_k < 16) throw ConfigError("gbz: n_k must be >= 16");
    if (!(match_tol > 0.0)) throw ConfigError("gbz: match_tol must be positive");
    if (n_steps < 1) throw ConfigError("gbz: n_steps must be >= 1");
}

CircleScan circle_scan(const ModelParams& p, const GBZGrid& grid) {
    grid.validate();
    BlochPropagatorWorkspace ws(p, grid.n_steps);
    CircleScan s;
    s.grid = grid;
    s.period = ws.period();
    s.q = int(p.flux.q);
    s.lambda.resize(std::size_t(grid.n_kappa) * std::size_t(grid.n_k) * std::size_t(s.q));
    std::size_t n = 0;
    for (int i = 0; i < grid.n_kappa; ++i) {
        const double r = std::exp(-grid.kappa(i));
        for (int l = 0; l < grid.n_k; ++l) {
            const auto ev = eig(ws.compute(std::polar(r, s.k(l))), false).values;
            for (int a = 0; a < s.q; ++a) s.lambda[n++] = ev[a];
        }
    }
    return s;
}

namespace {

cplx circle_det(const CircleScan& scan, int i, int l, cplx target) {
    cplx prod{1.0, 0.0};
    for (int a = 0; a < scan.q; ++a) prod *= scan.at(i, l, a) - target;
    return prod;
}

cplx target_of(cplx energy, double T) { return std::exp(cplx(0.0, -T) * energy); }

} // namespace

int circle_winding(const CircleScan& scan, int i, cplx energy) {
    const cplx target = target_of(energy, scan.period);
    const int nk = scan.grid.n_k;
    double phase = 0.0;
    cplx prev = circle_det(scan, i, 0, target);
    for (int l = 1; l <= nk; ++l) {
        const cplx cur = circle_det(scan, i, l % nk, target);
        phase += std::arg(cur / prev);
        prev = cur;
    }
    return int(std::lround(phase / (2.0 * pi)));
}

const char* feature_name(Feature f) {
    switch (f) {
    case Feature::Saddle: return "saddle";
    case Feature::Cusp: return "cusp";
    default: return "none";
    }
}

const char* direction_name(Direction d) {
    switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    default: return "bidirectional";
    }
}

namespace {

struct Bracket {
    int outer = -1; ///< last row with positive winding (larger radius)
    int inner = -1; ///< first row with negative winding
};

Bracket find_bracket(const CircleScan& scan, cplx energy) {
    Bracket b;
    int last_pos = -1;
    for (int i = 0; i < scan.grid.n_kappa; ++i) {
        const int w = circle_winding(scan, i, energy);
        if (w > 0) last_pos = i;
        if (w < 0) {
            if (last_pos >= 0) {
                b.outer = last_pos;
                b.inner = i;
            }
            break;
        }
    }
    return b;
}

class DetFunction {
public:
    DetFunction(const ModelParams& p, int n_steps, cplx energy) : ws_(p, n_steps) {
        target_ = target_of(energy, ws_.period());
    }
    cplx operator()(cplx beta) {
        const CMatrix& u = ws_.compute(beta);
        CMatrix m = u - target_ * CMatrix::Identity(u.rows(), u.cols());
        return m.determinant();
    }

private:
    BlochPropagatorWorkspace ws_;
    cplx target_;
};

bool newton(DetFunction& g, cplx& beta) {
    for (int it = 0; it < 40; ++it) {
        const double h = 1e-6 * std::abs(beta);
        const cplx gp = (g(beta + h) - g(beta - h)) / (2.0 * h);
        if (gp == cplx(0.0, 0.0) || !std::isfinite(std::abs(gp))) return false;
        cplx step = g(beta) / gp;
        const double cap = 0.05 * std::abs(beta);
        if (std::abs(step) > cap) step *= cap / std::abs(step);
        beta -= step;
        if (!std::isfinite(std::abs(beta)) || std::abs(beta) < 1e-6) return false;
        if (std::abs(step) < 1e-12 * std::abs(beta)) return true;
    }
    return false;
}

} // namespace

GBZResult gbz_circle_scan(const ModelParams& p, const CircleScan& scan, const CVector& energies, int band_id) {
    GBZResult out;
    out.band_id = band_id;
    const double T = scan.period;
    const auto& grid = scan.grid;
    for (Eigen::Index e = 0; e < energies.size(); ++e) {
        const cplx energy = energies[e];
        const Bracket b = find_bracket(scan, energy);
        if (b.outer < 0) {
            ++out.unmatched_energies;
            continue;
        }
        const double r_outer = std::exp(-grid.kappa(b.outer));
        const double r_inner = std::exp(-grid.kappa(b.inner));
        const cplx target = target_of(energy, T);

        std::vector<cplx> seeds;
        for (int i = b.outer; i <= b.inner; ++i) {
            const double r = std::exp(-grid.kappa(i));
            std::vector<std::pair<double, int>> minima;
            for (int l = 0; l < grid.n_k; ++l) {
                const double here = std::abs(circle_det(scan, i, l, target));
                const double left = std::abs(circle_det(scan, i, (l + grid.n_k - 1) % grid.n_k, target));
                const double right = std::abs(circle_det(scan, i, (l + 1) % grid.n_k, target));
                if (here <= left && here <= right) minima.emplace_back(here, l);
                for (int a = 0; a < scan.q; ++a)
                    if (quasienergy_distance(quasienergy(scan.at(i, l, a), T), energy, T) < grid.match_tol)
                        ++out.grid_matches;
            }
            std::sort(minima.begin(), minima.end());
            for (std::size_t m = 0; m < std::min<std::size_t>(6, minima.size()); ++m)
                seeds.push_back(std::polar(r, scan.k(minima[m].second)));
        }

        DetFunction g(p, grid.n_steps, energy);
        std::vector<cplx> roots;
        for (cplx beta : seeds) {
            if (!newton(g, beta)) continue;
            const double r = std::abs(beta);
            if (r < r_inner * 0.995 || r > r_outer * 1.005) continue;
            const bool dup = std::any_of(roots.begin(), roots.end(),
                                         [&](cplx x) { return std::abs(x - beta) < 1e-6 * std::abs(beta); });
            if (!dup) roots.push_back(beta);
        }
        for (cplx beta : roots)
            out.points.push_back({beta, energy, -std::log(std::abs(beta)), std::size_t(e), Feature::None});
    }
    if (out.points.empty())
        throw NumericalError("gbz: no GBZ points found; widen the kappa range or refine the grid");
    out.r_min = std::numeric_limits<double>::infinity();
    out.r_max = 0.0;
    for (const auto& pt : out.points) {
        out.r_min = std::min(out.r_min, std::abs(pt.beta));
        out.r_max = std::max(out.r_max, std::abs(pt.beta));
    }
    if (out.unmatched_energies > 0) {
        std::ostringstream msg;
        msg << out.unmatched_energies << " energies had no winding sign change in the kappa range";
        out.diagnostics.push_back(msg.str());
    }
    return out;
}

GBZResult gbz_circle_scan(const ModelParams& p, const CVector& energies, const GBZGrid& grid, int band_id) {
    return gbz_circle_scan(p, circle_scan(p, grid), energies, band_id);
}

std::vector<std::size_t> arc_order(const CVector& energies, double period) {
    const auto n = std::size_t(energies.size());
    if (n < 2) {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(i);
        return v;
    }
    auto dist = [&](std::size_t a, std::size_t b) {
        return quasienergy_distance(energies[Eigen::Index(a)], energies[Eigen::Index(b)], period);
    };
    // Prim
    std::vector<std::vector<std::size_t>> adj(n);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> parent(n, n);
    std::vector<bool> in(n, false);
    best[0] = 0.0;
    for (std::size_t it = 0; it < n; ++it) {
        std::size_t u = n;
        for (std::size_t i = 0; i < n; ++i)
            if (!in[i] && (u == n || best[i] < best[u])) u = i;
        in[u] = true;
        if (parent[u] < n) {
            adj[u].push_back(parent[u]);
            adj[parent[u]].push_back(u);
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!in[i] && dist(u, i) < best[i]) {
                best[i] = dist(u, i);
                parent[i] = u;
            }
    }
    auto farthest = [&](std::size_t start, std::vector<std::size_t>& prev) {
        std::vector<double> d(n, -1.0);
        prev.assign(n, n);
        std::vector<std::size_t> stack{start};
        d[start] = 0.0;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (auto w : adj[u])
                if (d[w] < 0.0) {
                    d[w] = d[u] + dist(u, w);
                    prev[w] = u;
                    stack.push_back(w);
                }
        }
        return std::size_t(std::max_element(d.begin(), d.end()) - d.begin());
    };
    std::vector<std::size_t> prev;
    const auto a = farthest(0, prev);
    const auto b = farthest(a, prev);
    std::vector<std::size_t> path;
    for (auto v = b; v != n; v = prev[v]) path.push_back(v);
    return path;
}

void classify_features(GBZResult& gbz, const CVector& energies, double period) {
    for (auto& pt : gbz.points) pt.tag = Feature::None;
    gbz.saddles.clear();
    gbz.cusps.clear();
    const auto path = arc_order(energies, period);
    if (path.size() < 3) {
        gbz.diagnostics.push_back("arc too short for feature classification");
        return;
    }
    const auto front = path.front();
    const auto back = path.back();

    std::size_t cusp = path[1];
    double sharpest = -1.0;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        const cplx a = energies[Eigen::Index(path[i])] - energies[Eigen::Index(path[i - 1])];
        const cplx b = energies[Eigen::Index(path[i + 1])] - energies[Eigen::Index(path[i])];
        const double turn = std::abs(std::arg(b / a));
        if (turn > sharpest) {
            sharpest = turn;
            cusp = path[i];
        }
    }

    for (std::size_t i = 0; i < gbz.points.size(); ++i) {
        auto& pt = gbz.points[i];
        if (pt.energy_index == front || pt.energy_index == back) {
            pt.tag = Feature::Saddle;
            gbz.saddles.push_back(i);
        } else if (pt.energy_index == cusp) {
            pt.tag = Feature::Cusp;
            gbz.cusps.push_back(i);
        }
    }
    bool front_hit = false, back_hit = false;
    for (auto i : gbz.saddles) {
        front_hit |= gbz.points[i].energy_index == front;
        back_hit |= gbz.points[i].energy_index == back;
    }
    if (!front_hit || !back_hit) gbz.diagnostics.push_back("an arc endpoint has no GBZ root");
    if (gbz.cusps.size() < 2) gbz.diagnostics.push_back("cusp energy has fewer than two GBZ roots");

    std::vector<double> steps;
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        steps.push_back(quasienergy_distance(energies[Eigen::Index(path[i])], energies[Eigen::Index(path[i + 1])], period));
    std::vector<double> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    const std::size_t m = std::min<std::size_t>(3, steps.size());
    double ends = 0.0;
    for (std::size_t i = 0; i < m; ++i) ends += steps[i] + steps[steps.size() - 1 - i];
    gbz.saddle_density_ratio = med > 0.0 ? ends / (2.0 * double(m)) / med : 0.0;
}

Direction direction_from_range(double r_min, double r_max) {
    if (r_max < 1.0) return Direction::Left;
    if (r_min > 1.0) return Direction::Right;
    return Direction::Bidirectional;
}

RadialRange radial_range(const CircleScan& scan, const CVector& energies) {
    RadialRange out;
    out.r_min = std::numeric_limits<double>::infinity();
    out.r_max = 0.0;
    bool any = false;
    for (Eigen::Index e = 0; e < energies.size(); ++e) {
        const Bracket b = find_bracket(scan, energies[e]);
        if (b.outer < 0) continue;
        any = true;
        const double r = std::exp(-0.5 * (scan.grid.kappa(b.outer) + scan.grid.kappa(b.inner)));
        out.r_min = std::min(out.r_min, r);
        out.r_max = std::max(out.r_max, r);
    }
    if (!any) throw NumericalError("gbz radial range: no energy has a winding sign change in the kappa range");
    out.direction = direction_from_range(out.r_min, out.r_max);
    return out;
}

RadialRange radial_range(const ModelParams& p, const CVector& energies, const GBZGrid& grid) {
    return radial_range(circle_scan(p, grid), energies);
}

double verify_points(const ModelParams& p, const GBZResult& gbz, int n_steps) {
    BlochPropagatorWorkspace ws(p, n_steps);
    const double T = ws.period();
    double worst = 0.0;
    for (const auto& pt : gbz.points) {
        const auto eps = propagator_quasienergies(ws.compute(pt.beta), T);
        double prod = 1.0;
        for (Eigen::Index a = 0; a < eps.size(); ++a) prod *= quasienergy_distance(eps[a], pt.energy, T);
        worst = std::max(worst, prod);
    }
    return worst;
}

} // namespace floqskin
