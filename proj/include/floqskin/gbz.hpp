#pragma once

#include "floqskin/spectra.hpp"

#include <string>
#include <vector>

namespace floqskin {

struct GBZGrid {
    double kappa_min = -0.6;
    double kappa_max = 0.6;
    int n_kappa = 121;
    int n_k = 721;
    double match_tol = 2e-3;
    int n_steps = default_n_steps;

    void validate() const;
    double kappa(int i) const { return kappa_min + (kappa_max - kappa_min) * i / (n_kappa - 1); }
};

/// Propagator eigenvalues on every circle |beta| = exp(-kappa) of the grid.
struct CircleScan {
    GBZGrid grid;
    double period = 0.0;
    int q = 0;
    std::vector<cplx> lambda; ///< [kappa][k][band]

    cplx at(int i, int l, int a) const {
        return lambda[(std::size_t(i) * std::size_t(grid.n_k) + std::size_t(l)) * std::size_t(q) + std::size_t(a)];
    }
    double k(int l) const { return -pi + 2.0 * pi * l / grid.n_k; }
};

CircleScan circle_scan(const ModelParams& p, const GBZGrid& grid = {});

/// Winding of det[U(beta) - exp(-i E T)] along circle row i.
int circle_winding(const CircleScan& scan, int i, cplx energy);

enum class Feature { None, Saddle, Cusp };

const char* feature_name(Feature f);

struct GBZPoint {
    cplx beta;
    cplx energy;
    double kappa = 0.0;
    std::size_t energy_index = 0;
    Feature tag = Feature::None;
};

struct GBZResult {
    std::vector<GBZPoint> points;
    std::vector<std::size_t> saddles; ///< indices into points
    std::vector<std::size_t> cusps;
    double r_min = 0.0;
    double r_max = 0.0;
    int band_id = 1;
    std::size_t grid_matches = 0;      ///< circle eigenvalues within match_tol of an energy
    std::size_t unmatched_energies = 0; ///< energies with no winding bracket
    double saddle_density_ratio = 0.0; ///< arc spacing near the endpoints over the median spacing
    std::vector<std::string> diagnostics;
};

/// Scan circles, bracket the GBZ radius of each energy by the sign change of the winding,
/// then polish the roots of det[U(beta) - exp(-i E T)] with Newton steps in beta.
GBZResult gbz_circle_scan(const ModelParams& p, const CircleScan& scan, const CVector& energies, int band_id = 1);
GBZResult gbz_circle_scan(const ModelParams& p, const CVector& energies, const GBZGrid& grid = {}, int band_id = 1);

/// Tag saddle points (roots at the arc endpoints) and the cusp pair (roots at the sharpest arc turn).
void classify_features(GBZResult& gbz, const CVector& energies, double period);

/// Order of `energies` along their arc: the longest path of the minimum spanning tree.
std::vector<std::size_t> arc_order(const CVector& energies, double period);

enum class Direction { Left, Right, Bidirectional };

const char* direction_name(Direction d);

struct RadialRange {
    double r_min = 0.0;
    double r_max = 0.0;
    Direction direction = Direction::Bidirectional;
};

Direction direction_from_range(double r_min, double r_max);

/// Radius interval from winding brackets only; each bracket contributes its midpoint radius.
RadialRange radial_range(const CircleScan& scan, const CVector& energies);
RadialRange radial_range(const ModelParams& p, const CVector& energies, const GBZGrid& grid = {});

/// Largest |det[H_F(beta) - E]| over the points with the given Trotter step count.
double verify_points(const ModelParams& p, const GBZResult& gbz, int n_steps);

} // namespace floqskin
