#include "floqskin/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace floqskin {

SpectrumResult realspace_floquet_spectrum(const ModelParams& p, Boundary boundary, int n_steps, bool with_vectors,
                                          std::size_t dense_cap) {
    ModelParams q = p;
    q.boundary = boundary;
    q.validate();
    if (q.sites() > dense_cap)
        throw ConfigError("spectrum: L = " + std::to_string(q.sites()) + " exceeds the dense cap " +
                          std::to_string(dense_cap));
    const auto U = realspace_propagator(q, n_steps);
    auto dec = eig(U.matrix, with_vectors);
    SpectrumResult s;
    s.boundary = boundary;
    s.params = q;
    s.period = U.period;
    s.n_steps = n_steps;
    s.eigenvalues.resize(dec.values.size());
    for (Eigen::Index i = 0; i < dec.values.size(); ++i) {
        if (dec.values[i] == cplx(0.0, 0.0))
            throw DefectivePropagator("spectrum: singular propagator (state " + std::to_string(i) + ")");
        s.eigenvalues[i] = quasienergy(dec.values[i], U.period);
    }
    s.eigenvectors = std::move(dec.vectors);
    return s;
}

SkinProfile skin_weight(const SpectrumResult& s, const std::vector<std::size_t>& selection,
                        const std::string& filter_name) {
    if (s.boundary != Boundary::OBC) throw ConfigError("skin weight: requires an OBC spectrum");
    if (selection.empty()) throw ConfigError("skin weight: empty state selection (" + filter_name + ")");
    if (s.eigenvectors.size() == 0) throw ConfigError("skin weight: spectrum has no eigenvectors");
    const auto L = s.eigenvectors.rows();
    SkinProfile out;
    out.filter = filter_name;
    out.n_selected = selection.size();
    out.W = RVector::Zero(L);
    for (auto i : selection) out.W += s.eigenvectors.col(Eigen::Index(i)).cwiseAbs2();
    const double total = out.W.sum();
    out.left_mass_fraction = out.W.head(L / 3).sum() / total;
    return out;
}

double side_mass(const SpectrumResult& s, std::size_t i) {
    const auto L = s.eigenvectors.rows();
    const auto v = s.eigenvectors.col(Eigen::Index(i));
    const double total = v.squaredNorm();
    return (v.head(L / 3).squaredNorm() - v.tail(L / 3).squaredNorm()) / total;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

/// Sorted distances from state i to every other selected state.
std::vector<double> neighbour_distances(const SpectrumResult& s, const std::vector<std::size_t>& sel,
                                        std::size_t i) {
    std::vector<double> d;
    d.reserve(sel.size());
    for (auto j : sel)
        if (j != i) d.push_back(quasienergy_distance(s.eigenvalues[Eigen::Index(i)], s.eigenvalues[Eigen::Index(j)], s.period));
    std::sort(d.begin(), d.end());
    return d;
}

std::vector<std::size_t> all_states(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t(0));
    return v;
}

double median_nearest_spacing(const SpectrumResult& s, const std::vector<std::size_t>& sel) {
    std::vector<double> nn;
    for (auto i : sel) {
        const auto d = neighbour_distances(s, sel, i);
        if (!d.empty()) nn.push_back(d.front());
    }
    return median(nn);
}

} // namespace

std::vector<std::size_t> detect_edge_states(const SpectrumResult& s, const EdgeStateOptions& opt) {
    if (s.boundary != Boundary::OBC) throw ConfigError("edge states: requires an OBC spectrum");
    if (s.eigenvectors.size() == 0) throw ConfigError("edge states: spectrum has no eigenvectors");
    const auto all = all_states(s.size());
    const double spacing = median_nearest_spacing(s, all);
    const auto L = s.eigenvectors.rows();
    const Eigen::Index w = std::min<Eigen::Index>(L / 2, opt.edge_sites > 0 ? opt.edge_sites : 5 * s.params.cell());
    std::vector<std::size_t> out;
    for (auto i : all) {
        const auto d = neighbour_distances(s, all, i);
        if (int(d.size()) < opt.k_nearest) continue;
        if (d[std::size_t(opt.k_nearest - 1)] <= opt.gap_factor * spacing) continue;
        const auto v = s.eigenvectors.col(Eigen::Index(i));
        const double total = v.squaredNorm();
        const double edge = std::max(v.head(w).squaredNorm(), v.tail(w).squaredNorm()) / total;
        if (edge > opt.edge_mass) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& edge) {
    const std::set<std::size_t> skip(edge.begin(), edge.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!skip.count(i)) out.push_back(i);
    return out;
}

std::vector<std::vector<std::size_t>> cluster_states(const SpectrumResult& s, const std::vector<std::size_t>& sel,
                                                     double factor) {
    const double link = factor * median_nearest_spacing(s, sel);
    const std::size_t n = sel.size();
    std::vector<int> label(n, -1);
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (label[seed] >= 0) continue;
        const int id = int(clusters.size());
        clusters.emplace_back();
        std::vector<std::size_t> stack{seed};
        label[seed] = id;
        while (!stack.empty()) {
            const auto a = stack.back();
            stack.pop_back();
            clusters.back().push_back(sel[a]);
            for (std::size_t b = 0; b < n; ++b) {
                if (label[b] >= 0) continue;
                if (quasienergy_distance(s.eigenvalues[Eigen::Index(sel[a])], s.eigenvalues[Eigen::Index(sel[b])],
                                         s.period) <= link) {
                    label[b] = id;
                    stack.push_back(b);
                }
            }
        }
    }
    return clusters;
}

std::vector<std::size_t> dominant_band(const SpectrumResult& s, const EdgeStateOptions& opt) {
    const auto bulk = complement(s.size(), detect_edge_states(s, opt));
    if (bulk.empty()) throw NumericalError("dominant band: no bulk states");
    const auto clusters = cluster_states(s, bulk);
    std::size_t best = 0;
    double best_im = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (auto i : clusters[c])
            if (s.eigenvalues[Eigen::Index(i)].imag() > best_im) {
                best_im = s.eigenvalues[Eigen::Index(i)].imag();
                best = c;
            }
    auto out = clusters[best];
    std::sort(out.begin(), out.end());
    return out;
}

CVector PbcLoops::quasienergies() const {
    CVector out(lambda.size());
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < lambda.rows(); ++i)
        for (Eigen::Index a = 0; a < lambda.cols(); ++a) out[n++] = quasienergy(lambda(i, a), period);
    return out;
}

PbcLoops pbc_loops(const ModelParams& p, int n_k, int n_steps) {
    if (n_k < 8) throw ConfigError("pbc loops: need at least 8 k points");
    BlochPropagatorWorkspace ws(p, n_steps);
    PbcLoops out;
    out.period = ws.period();
    out.k.resize(std::size_t(n_k));
    out.lambda.resize(n_k, Eigen::Index(p.flux.q));
    for (int i = 0; i < n_k; ++i) {
        const double k = 2.0 * pi * i / n_k;
        out.k[std::size_t(i)] = k;
        out.lambda.row(i) = eig(ws.compute(std::polar(1.0, k)), false).values.transpose();
    }
    return out;
}

WindingDatum spectral_winding(const PbcLoops& loops, cplx e_ref) {
    const double T = loops.period;
    const cplx target = std::exp(cplx(0.0, -T) * e_ref);
    const auto nk = loops.lambda.rows();
    double closest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nk; ++i)
        for (Eigen::Index a = 0; a < loops.lambda.cols(); ++a)
            closest = std::min(closest, quasienergy_distance(quasienergy(loops.lambda(i, a), T), e_ref, T));
    if (closest <= 1e-6) throw IllDefinedWinding("winding: reference energy lies on the PBC curve");

    auto f = [&](Eigen::Index i) {
        cplx prod{1.0, 0.0};
        for (Eigen::Index a = 0; a < loops.lambda.cols(); ++a) prod *= loops.lambda(i % nk, a) - target;
        return prod;
    };
    double phase = 0.0;
    cplx prev = f(0);
    for (Eigen::Index i = 1; i <= nk; ++i) {
        const cplx cur = f(i);
        phase += std::arg(cur / prev);
        prev = cur;
    }
    WindingDatum w;
    w.e_ref = e_ref;
    const double turns = phase / (2.0 * pi);
    w.winding = int(std::lround(turns));
    w.residue = std::abs(turns - w.winding);
    w.flagged = w.residue >= 0.25;
    return w;
}

double winding_coverage(const PbcLoops& loops, const CVector& energies, double radius) {
    if (energies.size() == 0) return 0.0;
    std::size_t covered = 0;
    for (Eigen::Index i = 0; i < energies.size(); ++i) {
        std::vector<cplx> probes{energies[i]};
        for (double frac : {0.5, 1.0})
            for (int j = 0; j < 16; ++j) probes.push_back(energies[i] + std::polar(frac * radius, 2.0 * pi * j / 16));
        for (const auto& e : probes) {
            try {
                if (spectral_winding(loops, e).winding != 0) {
                    ++covered;
                    break;
                }
            } catch (const IllDefinedWinding&) {
            }
        }
    }
    return double(covered) / double(energies.size());
}

std::vector<CVector> static_phi_scan(const ModelParams& p, const std::vector<double>& phase_offsets) {
    if (p.omega != 0.0) throw WrongModel("phi scan: requires a static model (omega = 0)");
    std::vector<CVector> out;
    out.reserve(phase_offsets.size());
    for (double phi0 : phase_offsets) {
        ModelParams q = p;
        q.phase_offset = phi0;
        q.boundary = Boundary::OBC;
        q.validate();
        out.push_back(eig(real_space_hamiltonian(q, 0.0), false).values);
    }
    return out;
}

namespace {

cplx centroid(const CVector& e, const std::vector<int>& band, int id) {
    cplx sum{};
    int n = 0;
    for (std::size_t i = 0; i < band.size(); ++i)
        if (band[i] == id) {
            sum += e[Eigen::Index(i)];
            ++n;
        }
    return n > 0 ? sum / double(n) : cplx(std::nan(""), std::nan(""));
}

} // namespace

IncommensurateReport incommensurate_near_half(const ModelParams& p, int n_steps, double side_threshold) {
    const double phi = p.flux.value();
    const double dev = phi - 0.5;
    if (dev == 0.0) throw ConfigError("incommensurate: flux exactly 1/2 is reciprocal, nothing splits");
    if (std::abs(dev) > 0.05) throw ConfigError("incommensurate: |flux - 1/2| must be <= 0.05");

    const auto s = realspace_floquet_spectrum(p, Boundary::OBC, n_steps, true);
    IncommensurateReport r;
    r.deviation = dev;
    r.delta = 1.0 / phi - 2.0;
    r.n_min = int(std::lround(1.0 / std::abs(r.delta)));
    r.eigenvalues = s.eigenvalues;
    const auto n = s.size();
    r.side.resize(Eigen::Index(n));
    r.band.assign(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = side_mass(s, i);
        r.side[Eigen::Index(i)] = m;
        if (m > side_threshold)
            r.band[i] = 1;
        else if (m < -side_threshold)
            r.band[i] = 2;
        ++r.count[r.band[i] - 1];
    }
    r.delta_E = std::abs(centroid(s.eigenvalues, r.band, 1) - centroid(s.eigenvalues, r.band, 3));

    double gap = std::numeric_limits<double>::infinity();
    double side1 = 0.0, side2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.band[i] == 1) side1 += r.side[Eigen::Index(i)];
        if (r.band[i] == 2) side2 += r.side[Eigen::Index(i)];
        if (r.band[i] != 1) continue;
        for (std::size_t j = 0; j < n; ++j)
            if (r.band[j] == 3)
                gap = std::min(gap, quasienergy_distance(s.eigenvalues[Eigen::Index(i)],
                                                         s.eigenvalues[Eigen::Index(j)], s.period));
    }
    r.gap_I_III = gap;
    r.side_I = r.count[0] ? side1 / double(r.count[0]) : 0.0;
    r.side_II = r.count[1] ? side2 / double(r.count[1]) : 0.0;

    // density minima of the extended band
    const auto L = Eigen::Index(s.eigenvectors.rows());
    RVector W = RVector::Zero(L);
    for (std::size_t i = 0; i < n; ++i)
        if (r.band[i] == 3) W += s.eigenvectors.col(Eigen::Index(i)).cwiseAbs2();
    // best-fitting sinusoid plus linear trend; at least 1.5 periods must fit in the chain
    Eigen::MatrixXd A(L, 4);
    for (Eigen::Index x = 0; x < L; ++x) A(x, 0) = 1.0, A(x, 1) = double(x) / double(L);
    double best = std::numeric_limits<double>::infinity(), best_period = 0.0;
    for (double P = 20.0; P <= double(L) / 1.5; P += 0.25) {
        for (Eigen::Index x = 0; x < L; ++x) {
            A(x, 2) = std::cos(2.0 * pi * double(x) / P);
            A(x, 3) = std::sin(2.0 * pi * double(x) / P);
        }
        const Eigen::VectorXd c = A.colPivHouseholderQr().solve(W);
        const double res = (A * c - W).squaredNorm();
        if (res < best) best = res, best_period = P;
    }
    r.valley_spacing = best_period / double(p.cell());
    return r;
}

} // namespace floqskin
