#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wigner/rng.hpp"
#include "wigner/torus.hpp"

namespace wigner {

/// A set of point charges on the torus plus the energy of that arrangement.
struct Configuration {
    std::vector<TorusPoint> positions;
    double energy = 0.0;
};

/// Thrown by minimize() when the gradient tolerance is not reached within the
/// iteration budget. Carries the best configuration found so far.
struct MinimizeFailure : std::runtime_error {
    Configuration best;
    explicit MinimizeFailure(Configuration c)
        : std::runtime_error("classical minimization did not converge"), best(std::move(c)) {}
};

struct MinimizeOptions {
    double grad_tol = 1e-10; // max-norm of the gradient, hartree/bohr
    int max_iter = 10000;
    bool polish = true; // Newton refinement after CG
    // Optional per-iteration record of (energy, grad max-norm), CG phase only.
    std::vector<std::pair<double, double>>* trace = nullptr;
};

/// Total Coulomb energy sum_{i<j} 1/r_ij with the renormalized distance.
double classical_energy(const std::vector<TorusPoint>& pts, const TorusCell& cell);

/// Analytic gradient of classical_energy, one (gx,gy) per particle.
std::vector<std::array<double, 2>> classical_gradient(const std::vector<TorusPoint>& pts,
                                                      const TorusCell& cell);

/// Local minimization from a starting arrangement: nonlinear CG with Armijo
/// backtracking, optionally followed by a projected Newton polish. The result
/// is gauge-fixed (particle 0 moved to the origin) with positions reduced
/// into the cell.
Configuration minimize(const std::vector<TorusPoint>& start, const TorusCell& cell,
                       const MinimizeOptions& opt = {});

/// Uniform random arrangement; points closer than 1e-3*min(lx,ly) to an
/// already placed one are redrawn.
std::vector<TorusPoint> random_configuration(const TorusCell& cell, Rng& rng);

struct MultiStartResult {
    Configuration best;                 // lowest-energy distinct minimum
    std::vector<Configuration> minima;  // distinct minima, ascending energy
    int n_starts = 0;
    int n_converged = 0;
};

/// Independent minimizations from n_starts seeded random arrangements
/// (per-start RNG substreams, so results do not depend on thread count),
/// deduplicated by energy and by symmetry-adapted RMS distance.
MultiStartResult multi_start(const TorusCell& cell, int n_starts, std::uint64_t seed,
                             const MinimizeOptions& opt = {});

/// Smallest eigenvalue of the Hessian restricted to the complement of the two
/// rigid-translation directions. Positive at a strict local minimum.
double projected_hessian_min_eig(const std::vector<TorusPoint>& pts, const TorusCell& cell);

/// CSV with a `# N lx ly energy` comment header and index,x,y rows, 17
/// significant digits (round-trips bit-exactly). A nonempty stamp is written
/// as an extra `# ...` line; readers skip comment lines after the header.
void write_positions_csv(const std::filesystem::path& path, const Configuration& conf,
                         const TorusCell& cell, const std::string& stamp = {});

/// Inverse of write_positions_csv. The cell is reconstructed from the header
/// (rs implied by N and the cell area).
std::pair<Configuration, TorusCell> read_positions_csv(const std::filesystem::path& path);

} // namespace wigner
