#pragma once

#include "floqskin/floquet.hpp"

#include <string>
#include <vector>

namespace floqskin {

class IllDefinedWinding : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline constexpr std::size_t default_dense_cap = 1200;

struct SpectrumResult {
    Boundary boundary = Boundary::OBC;
    CVector eigenvalues;  ///< folded quasienergies
    CMatrix eigenvectors; ///< unit columns; empty if not requested
    ModelParams params;
    double period = 0.0;
    int n_steps = 0;

    std::size_t size() const { return std::size_t(eigenvalues.size()); }
};

/// Real-space one-period propagator under `boundary`, diagonalized; quasienergies on the principal branch.
SpectrumResult realspace_floquet_spectrum(const ModelParams& p, Boundary boundary, int n_steps = default_n_steps,
                                          bool with_vectors = true, std::size_t dense_cap = default_dense_cap);

struct SkinProfile {
    RVector W;
    std::string filter;
    double left_mass_fraction = 0.0;
    std::size_t n_selected = 0;
};

SkinProfile skin_weight(const SpectrumResult& s, const std::vector<std::size_t>& selection,
                        const std::string& filter_name = "selection");

/// Mass of state `i` in the left third minus the right third.
double side_mass(const SpectrumResult& s, std::size_t i);

struct EdgeStateOptions {
    int k_nearest = 2;        ///< isolation measured to the k-th nearest eigenvalue
    double gap_factor = 2.0;  ///< isolation threshold in units of the median nearest spacing
    int edge_sites = 0;       ///< 0 means five unit cells
    double edge_mass = 0.8;
};

std::vector<std::size_t> detect_edge_states(const SpectrumResult& s, const EdgeStateOptions& opt = {});

/// Every state not listed in `edge`.
std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& edge);

/// Single-linkage clusters of the selected eigenvalues; link length = factor x median nearest spacing.
std::vector<std::vector<std::size_t>> cluster_states(const SpectrumResult& s, const std::vector<std::size_t>& sel,
                                                     double factor = 3.0);

/// Bulk cluster holding the largest imaginary part.
std::vector<std::size_t> dominant_band(const SpectrumResult& s, const EdgeStateOptions& opt = {});

/// Propagator eigenvalues along a closed k cycle; the unfolded form of the PBC loops.
struct PbcLoops {
    std::vector<double> k;
    CMatrix lambda; ///< rows k, columns band
    double period = 0.0;

    CVector quasienergies() const;
};

PbcLoops pbc_loops(const ModelParams& p, int n_k = 801, int n_steps = default_n_steps);

struct WindingDatum {
    cplx e_ref;
    int winding = 0;
    double residue = 0.0;
    bool flagged = false;
};

/// Winding of det[U(k) - exp(-i E_ref T)] over the cycle; equal to the winding of det[H_F(k) - E_ref].
WindingDatum spectral_winding(const PbcLoops& loops, cplx e_ref);

/// Fraction of `energies` with a nonzero winding somewhere within `radius`.
double winding_coverage(const PbcLoops& loops, const CVector& energies, double radius = 0.05);

/// Static OBC spectra over phase offsets.
std::vector<CVector> static_phi_scan(const ModelParams& p, const std::vector<double>& phase_offsets);

struct IncommensurateReport {
    double deviation = 0.0; ///< flux - 1/2
    double delta = 0.0;     ///< flux = 1/(2 + delta)
    CVector eigenvalues;
    RVector side;           ///< side mass per state
    std::vector<int> band;  ///< 1 left, 2 right, 3 extended
    std::size_t count[3] = {0, 0, 0};
    double delta_E = 0.0;   ///< distance between band I and band III centroids
    double gap_I_III = 0.0; ///< smallest distance between band I and band III eigenvalues
    double side_I = 0.0;
    double side_II = 0.0;
    int n_min = 0;
    double valley_spacing = 0.0; ///< period of the band III density in unit cells
};

IncommensurateReport incommensurate_near_half(const ModelParams& p, int n_steps = 100, double side_threshold = 0.25);

} // namespace floqskin
