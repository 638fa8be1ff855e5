#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wigner/classical.hpp"
#include "wigner/density.hpp"
#include "wigner/scf.hpp"

namespace wigner {

enum class RunMode { classical, quantum, compare };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s); // throws ConfigError

/// Everything a run needs, mirrored one-to-one by the JSON config format.
struct RunConfig {
    RunMode mode = RunMode::classical;
    int n_electrons = 2;
    double rs = 105.0;
    double aspect = 1.0;

    struct Basis {
        int nx = 20, ny = 20;
        double xi = 0.8;
    } basis;

    struct Quadrature {
        int mx = 0, my = 0; // 0 = derived from the basis (see make_quadrature)
    } quadrature;

    ScfOptions scf; // scf.seed is replaced by `seed` when the run starts

    struct Classical {
        int n_starts = 50;
        double grad_tol = 1e-10;
        int max_iter = 10000;
        bool polish = true;
    } classical;

    std::uint64_t seed = 1;
    std::string out = "runs";
};

/// Strict parse: unknown keys are rejected, missing keys keep their defaults,
/// every failure is a ConfigError naming the offending field. load_config
/// additionally reports unreadable files.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical serialization (sorted keys, two-space indent). parse_config is
/// its exact inverse for any valid config.
std::string serialize_config(const RunConfig& config);

void validate(const RunConfig& config); // throws ConfigError

/// 16-hex-digit FNV-1a over the canonical serialization with the output
/// directory removed, so the same physics re-run into a different directory
/// keeps its identity.
std::string config_hash(const RunConfig& config);

struct Preset {
    std::string name;
    std::string summary;
    RunConfig config;
};

/// Named ready-to-run configs: full-size square-cell runs for N = 1..20
/// (classical and quantum), the aspect-sqrt(3)/2 hexagonal cell, and reduced
/// "desk" quantum runs (N <= 6, 10x10 basis) sized for test machines.
const std::vector<Preset>& presets();
std::optional<RunConfig> find_preset(const std::string& name);

struct RunResult {
    enum class Status { ok = 0, not_converged = 3, analysis_error = 4 };
    Status status = Status::ok;
    std::string message; // empty on success

    std::filesystem::path dir; // <out>/<config-hash>
    std::string hash;

    std::optional<double> classical_energy;
    std::optional<HexOrder> classical_order;      // N >= 7 classical/compare runs
    std::optional<double> hf_energy;              // final (unpinned) SCF energy
    std::optional<LatticeReport> lattice;         // quantum/compare runs
};

/// Executes one run and writes its artifacts under <out>/<config-hash>/:
/// config.json always; positions.csv for classical work; density.dat and
/// lattice.json for quantum work; report.json last, recording energies,
/// iteration counts, the overlap spectrum, and any failure. Integral tables
/// are cached under <out>/cache/ keyed by their content hash. Convergence
/// and analysis failures come back in Status; configuration problems
/// (including a quadrature that fails its self-check) throw ConfigError.
RunResult run(const RunConfig& config);

} // namespace wigner
