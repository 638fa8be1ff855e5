#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdint>
#include <cstdio>
#include <string>

#include "wigner/errors.hpp"
#include "wigner/runner.hpp"

using namespace wigner;

namespace {

void print_presets() {
    std::size_t width = 0;
    for (const auto& p : presets()) width = std::max(width, p.name.size());
    for (const auto& p : presets())
        std::printf("%-*s  %s\n", static_cast<int>(width), p.name.c_str(), p.summary.c_str());
}

void print_result(const RunConfig& cfg, const RunResult& res) {
    std::printf("run %s (%s, N=%d) -> %s\n", res.hash.c_str(), to_string(cfg.mode).c_str(),
                cfg.n_electrons, res.dir.string().c_str());
    if (res.classical_energy)
        std::printf("  classical energy      %.12g hartree\n", *res.classical_energy);
    if (res.classical_order)
        std::printf("  classical psi6        %.6f (nn distance cv %.3e)\n",
                    res.classical_order->psi6, res.classical_order->neighbor_distance_cv);
    if (res.hf_energy) std::printf("  hartree-fock energy   %.12g hartree\n", *res.hf_energy);
    if (res.lattice) {
        std::printf("  density peaks         %zu", res.lattice->peaks.size());
        if (res.lattice->matched_rms)
            std::printf(", matched rms %.4g bohr", *res.lattice->matched_rms);
        if (res.lattice->psi6) std::printf(", psi6 %.6f", *res.lattice->psi6);
        std::printf(", %d inequivalence class%s\n", res.lattice->inequivalence_classes,
                    res.lattice->inequivalence_classes == 1 ? "" : "es");
    }
    std::printf("  status                %s\n",
                res.status == RunResult::Status::ok ? "ok" : res.message.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D Wigner fragments on a flat torus: classical minima and "
                 "high-spin Hartree-Fock"};
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("presets", "list named run configurations");

    auto* run_cmd = app.add_subcommand("run", "execute one run and write its artifacts");
    std::string preset_name, config_file, mode_str, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    run_cmd->add_option("--preset", preset_name, "named configuration (see `presets`)");
    run_cmd->add_option("--config", config_file, "JSON configuration file");
    auto* omode =
        run_cmd->add_option("--mode", mode_str, "override: classical, quantum, or compare");
    auto* oseed = run_cmd->add_option("--seed", seed, "override the run seed");
    auto* oout = run_cmd->add_option("--out", out_dir, "output root directory");
    auto* othreads = run_cmd->add_option("--threads", threads, "cap the OpenMP worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // flag/usage problems are config errors
    }

    if (list_cmd->parsed()) {
        print_presets();
        return 0;
    }

    RunConfig cfg;
    try {
        if (!preset_name.empty() && !config_file.empty())
            throw ConfigError("run", "--preset and --config are mutually exclusive");
        if (!preset_name.empty()) {
            auto found = find_preset(preset_name);
            if (!found) throw ConfigError("preset", "unknown preset '" + preset_name + "'");
            cfg = *found;
        } else if (!config_file.empty()) {
            cfg = load_config(config_file);
        } else {
            throw ConfigError("run", "one of --preset or --config is required");
        }
        if (omode->count()) cfg.mode = run_mode_from_string(mode_str);
        if (oseed->count()) cfg.seed = seed;
        if (oout->count()) cfg.out = out_dir;
        if (othreads->count()) {
            if (threads < 1) throw ConfigError("threads", "must be at least 1");
#ifdef _OPENMP
            omp_set_num_threads(threads);
#endif
        }
        validate(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        const RunResult res = run(cfg);
        print_result(cfg, res);
        if (res.status != RunResult::Status::ok)
            std::fprintf(stderr, "error: %s\n", res.message.c_str());
        return static_cast<int>(res.status);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
