#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wigner/integrals.hpp"

namespace wigner {

/// Self-consistent field for the fully spin-polarized determinant: all N
/// electrons share one spin channel, so a single Fock matrix with full
/// exchange describes the state exactly (ROHF and UHF coincide here).
struct ScfOptions {
    double conv_density_rms = 1e-8; // RMS change of D between iterations
    double conv_energy = 1e-9;      // |dE| between iterations (hartree)
    int max_iter = 200;
    int diis_depth = 8;
    double damping = 0.3;   // initial Fock damping, linear to 0 over damp_iters
    int damp_iters = 5;
    double lindep_tol = 1e-7; // absolute overlap-eigenvalue cutoff
    double pin_charge = 0.1;  // stage-1 pinning charge (0 disables stage 1)
    // Symmetry-breaking amplitude on the core-guess coefficients. The pin
    // removes the translational degeneracy but not the point-group one
    // (e.g. the two diagonals of a square cell); 1e-2 reliably tips the
    // guess into one basin, while 1e-3 can stall on a symmetric saddle.
    double guess_noise = 1e-2;
    std::uint64_t seed = 1;
};

struct ScfState {
    Eigen::MatrixXd coeffs;      // P x N occupied orbitals, orthonormal under S
    Eigen::MatrixXd density;     // D = C C^T
    Eigen::VectorXd mo_energies; // all surviving orbital energies, ascending
    double energy = 0.0;         // hartree
    int iterations = 0;
    bool converged = false;
    double commutator = 0.0; // max |X^T (FDS - SDF) X| at the last iteration
    std::vector<std::pair<double, double>> history; // (energy, density rms change)
};

struct NotConverged : std::runtime_error {
    ScfState last;
    int stage; // 0 plain solve, 1/2 inside the two-stage protocol
    NotConverged(ScfState s, int stage_)
        : std::runtime_error("scf did not converge in stage " + std::to_string(stage_)),
          last(std::move(s)),
          stage(stage_) {}
};

/// J and K contractions of the screened ERI store with a symmetric density:
/// J_pq = sum_rs D_rs (pq|rs), K_pq = sum_rs D_rs (pr|qs). Parallel over
/// store entries with per-thread accumulators merged in thread order
/// (bitwise reproducible for a fixed thread count; exactly symmetric).
void coulomb_exchange(const EriStore& eri, const Eigen::MatrixXd& D, Eigen::MatrixXd& J,
                      Eigen::MatrixXd& K);

/// Serial reference with the same orbit enumeration, used by tests and the
/// benchmark as the oracle for the parallel path.
void coulomb_exchange_reference(const EriStore& eri, const Eigen::MatrixXd& D,
                                Eigen::MatrixXd& J, Eigen::MatrixXd& K);

/// F = T (+ Vpin when include_pin) + J(D) - K(D).
Eigen::MatrixXd fock_build(const IntegralTables& tables, const Eigen::MatrixXd& D,
                           bool include_pin);

/// E[D] = tr(D Hcore) + 1/2 tr(D (J - K)) for the spin-polarized determinant.
double energy_from_density(const IntegralTables& tables, const Eigen::MatrixXd& D,
                           bool include_pin);

/// Canonical orthogonalization: X = U_kept diag(1/sqrt(s_kept)) where s are
/// overlap eigenvalues >= tol. Throws LinearDependenceCollapse if fewer than
/// n_required columns survive.
Eigen::MatrixXd canonical_orthogonalizer(const Eigen::MatrixXd& S, double tol, int n_required);

/// Plain SCF loop: core guess with seeded symmetry-breaking noise (or the
/// provided initial density), Fock damping over the first iterations, then
/// DIIS on the orthonormal-basis commutator; aufbau occupation each cycle.
/// Converged when the density RMS change and |dE| both cross their bounds.
ScfState scf_solve(const IntegralTables& tables, int n_electrons, const ScfOptions& opts,
                   bool include_pin = false,
                   const std::optional<Eigen::MatrixXd>& initial_density = std::nullopt);

struct TwoStageResult {
    std::optional<ScfState> stage1; // present when a pinning stage ran
    ScfState final_state;           // unpinned
};

/// Pinned first solve to break translational symmetry, then an unpinned
/// solve seeded with the stage-1 density. Requires tables built with a
/// pinning block when opts.pin_charge != 0; with pin_charge == 0 the first
/// stage is skipped.
TwoStageResult two_stage_protocol(const IntegralTables& tables, int n_electrons,
                                  const ScfOptions& opts);

} // namespace wigner
