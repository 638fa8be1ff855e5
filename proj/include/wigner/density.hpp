#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

#include "wigner/basis.hpp"
#include "wigner/classical.hpp"
#include "wigner/integrals.hpp"
#include "wigner/scf.hpp"
#include "wigner/torus.hpp"

namespace wigner {

struct DensityGrid {
    TorusCell cell;
    int mx = 0, my = 0;
    Eigen::MatrixXd values;       // (mx x my): value(p, q) at (p*lx/mx, q*ly/my)
    double normalization = 0.0;   // area-weighted integral (electron count)
};

/// n(r) = sum over occupied orbitals of |psi_k(r)|^2, evaluated through the
/// separable 1D profiles (identical to sum_ij D_ij g_i g_j, but nonnegative
/// by construction). Throws NormalizationDrift when |integral - N| > 1e-4.
DensityGrid density_from_state(const ScfState& state, const BasisSet& basis,
                               const QuadratureGrid& grid);

struct Peak {
    TorusPoint pos;
    double height; // refined amplitude (bohr^-2)
};

/// Strict local maxima over the toroidal 8-neighborhood above
/// rel_threshold * global max, refined to sub-grid accuracy by a quadratic
/// fit to log(n) over the 3x3 patch. Sorted by descending height. Throws
/// PeakCountMismatch unless exactly `expected` peaks are found.
std::vector<Peak> find_peaks(const DensityGrid& density, int expected,
                             double rel_threshold = 0.1);

/// RMS peak-to-charge distance after gauging away global translation, the
/// cell point group, and the pairing permutation.
double match_to_classical(const std::vector<Peak>& peaks, const Configuration& oracle,
                          const TorusCell& cell);

struct HexOrder {
    double psi6 = 0.0;                 // mean over sites of |mean_k exp(6 i theta_k)|
    double neighbor_distance_cv = 0.0; // pooled std/mean of the 6-NN distances
};

/// Bond-orientational order over each site's six nearest neighbors, with
/// bond angles from minimum-image Cartesian displacements (the renormalized
/// metric is Euclidean at bond range). Throws TooFewPeaks below 7 sites.
HexOrder hexagonal_order(const std::vector<TorusPoint>& sites, const TorusCell& cell);
HexOrder hexagonal_order(const std::vector<Peak>& peaks, const TorusCell& cell);

/// Cluster peaks by (height, second-moment eigenvalues of the density patch
/// within half the minimum inter-peak distance); peaks join a class when
/// every feature matches within relative tol. Returns the class count;
/// tol >= 1 always yields one class.
int inequivalence_classes(const DensityGrid& density, const std::vector<Peak>& peaks,
                          double tol = 0.02);

struct LatticeReport {
    std::vector<Peak> peaks;
    std::optional<double> matched_rms;            // present when an oracle was given
    std::optional<double> psi6;                   // present for >= 7 peaks
    std::optional<double> neighbor_distance_cv;   // ditto
    int inequivalence_classes = 0;
};

LatticeReport build_lattice_report(const DensityGrid& density, int expected,
                                   const std::optional<Configuration>& oracle,
                                   double class_tol = 0.02);

/// Versioned text export: "# wigner2d-density-v1" magic line, "# mx my lx ly
/// N" header, then mx lines of my values (17 significant digits, row-major).
/// A nonempty stamp adds one more `# ...` line; the reader skips any comment
/// lines between the header and the values.
void write_density(const std::filesystem::path& path, const DensityGrid& density,
                   const std::string& stamp = {});
DensityGrid read_density(const std::filesystem::path& path);

} // namespace wigner
