#include "wigner/runner.hpp"

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wigner/basis.hpp"
#include "wigner/errors.hpp"
#include "wigner/integrals.hpp"

namespace wigner {

using nlohmann::json;

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::classical: return "classical";
        case RunMode::quantum: return "quantum";
        case RunMode::compare: return "compare";
    }
    return "?";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "classical") return RunMode::classical;
    if (s == "quantum") return RunMode::quantum;
    if (s == "compare") return RunMode::compare;
    throw ConfigError("mode", "expected classical, quantum, or compare, got '" + s + "'");
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& reason) {
    throw ConfigError(field, reason);
}

std::string joined(const std::string& ctx, const std::string& key) {
    return ctx.empty() ? key : ctx + "." + key;
}

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> keys) {
    if (!j.is_object()) bad(ctx.empty() ? "config" : ctx, "expected an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) bad(joined(ctx, item.key()), "unknown key");
    }
}

void fetch_int(const json& j, const std::string& ctx, const char* key, int& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer()) bad(joined(ctx, key), "expected an integer");
    out = it->get<int>();
}

void fetch_u64(const json& j, const std::string& ctx, const char* key, std::uint64_t& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer() || (it->is_number_integer() && !it->is_number_unsigned() &&
                                     it->get<std::int64_t>() < 0))
        bad(joined(ctx, key), "expected a nonnegative integer");
    out = it->get<std::uint64_t>();
}

void fetch_double(const json& j, const std::string& ctx, const char* key, double& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number()) bad(joined(ctx, key), "expected a number");
    out = it->get<double>();
}

void fetch_bool(const json& j, const std::string& ctx, const char* key, bool& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_boolean()) bad(joined(ctx, key), "expected a boolean");
    out = it->get<bool>();
}

void fetch_string(const json& j, const std::string& ctx, const char* key, std::string& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_string()) bad(joined(ctx, key), "expected a string");
    out = it->get<std::string>();
}

json config_to_json(const RunConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    j["n_electrons"] = c.n_electrons;
    j["rs"] = c.rs;
    j["aspect"] = c.aspect;
    j["basis"] = {{"nx", c.basis.nx}, {"ny", c.basis.ny}, {"xi", c.basis.xi}};
    j["quadrature"] = {{"mx", c.quadrature.mx}, {"my", c.quadrature.my}};
    j["scf"] = {{"conv_density_rms", c.scf.conv_density_rms},
                {"conv_energy", c.scf.conv_energy},
                {"max_iter", c.scf.max_iter},
                {"diis_depth", c.scf.diis_depth},
                {"damping", c.scf.damping},
                {"damp_iters", c.scf.damp_iters},
                {"lindep_tol", c.scf.lindep_tol},
                {"pin_charge", c.scf.pin_charge},
                {"guess_noise", c.scf.guess_noise}};
    j["classical"] = {{"n_starts", c.classical.n_starts},
                      {"grad_tol", c.classical.grad_tol},
                      {"max_iter", c.classical.max_iter},
                      {"polish", c.classical.polish}};
    j["seed"] = c.seed;
    j["out"] = c.out;
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    check_keys(j, "",
               {"mode", "n_electrons", "rs", "aspect", "basis", "quadrature", "scf",
                "classical", "seed", "out"});
    std::string mode = to_string(c.mode);
    fetch_string(j, "", "mode", mode);
    c.mode = run_mode_from_string(mode);
    fetch_int(j, "", "n_electrons", c.n_electrons);
    fetch_double(j, "", "rs", c.rs);
    fetch_double(j, "", "aspect", c.aspect);
    if (auto it = j.find("basis"); it != j.end()) {
        check_keys(*it, "basis", {"nx", "ny", "xi"});
        fetch_int(*it, "basis", "nx", c.basis.nx);
        fetch_int(*it, "basis", "ny", c.basis.ny);
        fetch_double(*it, "basis", "xi", c.basis.xi);
    }
    if (auto it = j.find("quadrature"); it != j.end()) {
        check_keys(*it, "quadrature", {"mx", "my"});
        fetch_int(*it, "quadrature", "mx", c.quadrature.mx);
        fetch_int(*it, "quadrature", "my", c.quadrature.my);
    }
    if (auto it = j.find("scf"); it != j.end()) {
        check_keys(*it, "scf",
                   {"conv_density_rms", "conv_energy", "max_iter", "diis_depth", "damping",
                    "damp_iters", "lindep_tol", "pin_charge", "guess_noise"});
        fetch_double(*it, "scf", "conv_density_rms", c.scf.conv_density_rms);
        fetch_double(*it, "scf", "conv_energy", c.scf.conv_energy);
        fetch_int(*it, "scf", "max_iter", c.scf.max_iter);
        fetch_int(*it, "scf", "diis_depth", c.scf.diis_depth);
        fetch_double(*it, "scf", "damping", c.scf.damping);
        fetch_int(*it, "scf", "damp_iters", c.scf.damp_iters);
        fetch_double(*it, "scf", "lindep_tol", c.scf.lindep_tol);
        fetch_double(*it, "scf", "pin_charge", c.scf.pin_charge);
        fetch_double(*it, "scf", "guess_noise", c.scf.guess_noise);
    }
    if (auto it = j.find("classical"); it != j.end()) {
        check_keys(*it, "classical", {"n_starts", "grad_tol", "max_iter", "polish"});
        fetch_int(*it, "classical", "n_starts", c.classical.n_starts);
        fetch_double(*it, "classical", "grad_tol", c.classical.grad_tol);
        fetch_int(*it, "classical", "max_iter", c.classical.max_iter);
        fetch_bool(*it, "classical", "polish", c.classical.polish);
    }
    fetch_u64(j, "", "seed", c.seed);
    fetch_string(j, "", "out", c.out);
    validate(c);
    return c;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

json peaks_to_json(const std::vector<Peak>& peaks) {
    json arr = json::array();
    for (const auto& p : peaks)
        arr.push_back({{"x", p.pos.x}, {"y", p.pos.y}, {"height", p.height}});
    return arr;
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError("json", e.what());
    }
    return config_from_json(j);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& config) {
    return config_to_json(config).dump(2) + "\n";
}

void validate(const RunConfig& config) {
    const auto& c = config;
    if (c.n_electrons < 1) bad("n_electrons", "must be at least 1");
    if (!(c.rs > 0)) bad("rs", "must be positive");
    if (!(c.aspect > 0)) bad("aspect", "must be positive");
    if (c.basis.nx < 1 || c.basis.ny < 1) bad("basis", "grid must be at least 1x1");
    if (!(c.basis.xi > 0)) bad("basis.xi", "must be positive");
    for (auto [m, n, name] : {std::tuple{c.quadrature.mx, c.basis.nx, "quadrature.mx"},
                              std::tuple{c.quadrature.my, c.basis.ny, "quadrature.my"}}) {
        if (m == 0) continue; // derived from the basis
        if (m < 0) bad(name, "must be nonnegative");
        if (m % 2 != 0) bad(name, "must be even");
        if (m < 2 * n) bad(name, "must be at least twice the basis grid");
    }
    if (c.mode != RunMode::classical && c.basis.nx * c.basis.ny < c.n_electrons)
        bad("basis", "fewer basis functions than electrons");
    if (!(c.scf.conv_density_rms > 0)) bad("scf.conv_density_rms", "must be positive");
    if (!(c.scf.conv_energy > 0)) bad("scf.conv_energy", "must be positive");
    if (c.scf.max_iter < 1) bad("scf.max_iter", "must be at least 1");
    if (c.scf.diis_depth < 1) bad("scf.diis_depth", "must be at least 1");
    if (!(c.scf.damping >= 0 && c.scf.damping < 1)) bad("scf.damping", "must be in [0, 1)");
    if (c.scf.damp_iters < 0) bad("scf.damp_iters", "must be nonnegative");
    if (!(c.scf.lindep_tol > 0)) bad("scf.lindep_tol", "must be positive");
    if (!(c.scf.pin_charge >= 0)) bad("scf.pin_charge", "must be nonnegative");
    if (!(c.scf.guess_noise >= 0)) bad("scf.guess_noise", "must be nonnegative");
    if (c.classical.n_starts < 1) bad("classical.n_starts", "must be at least 1");
    if (!(c.classical.grad_tol > 0)) bad("classical.grad_tol", "must be positive");
    if (c.classical.max_iter < 1) bad("classical.max_iter", "must be at least 1");
    if (c.out.empty()) bad("out", "must not be empty");
}

std::string config_hash(const RunConfig& config) {
    json j = config_to_json(config);
    j.erase("out");
    return hex16(fnv1a(j.dump()));
}

RunResult run(const RunConfig& config) {
    validate(config);
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();

    RunResult result;
    result.hash = config_hash(config);
    result.dir = fs::path(config.out) / result.hash;
    fs::create_directories(result.dir);
    write_text(result.dir / "config.json", serialize_config(config));

    const std::string stamp = "config " + result.hash + " code " WIGNER2D_VERSION;
    const auto cell = cell_from_rs(config.rs, config.n_electrons, config.aspect);

    json report;
    report["format"] = "wigner2d-report-v1";
    report["code_version"] = WIGNER2D_VERSION;
    report["config_hash"] = result.hash;
    report["mode"] = to_string(config.mode);
    report["seed"] = config.seed;
    report["cell"] = {{"lx", cell.lx},
                      {"ly", cell.ly},
                      {"rs", cell.rs},
                      {"n_electrons", cell.n_electrons}};
#ifdef _OPENMP
    report["threads"] = omp_get_max_threads();
#else
    report["threads"] = 1;
#endif
    report["status"] = "ok";

    const auto finish = [&](RunResult::Status status, const std::string& message) {
        result.status = status;
        result.message = message;
        if (!message.empty()) {
            report["status"] = status == RunResult::Status::not_converged ? "not_converged"
                                                                          : "analysis_error";
            report["error"] = message;
        }
        report["elapsed_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_text(result.dir / "report.json", report.dump(2) + "\n");
        return result;
    };

    std::optional<Configuration> oracle;
    try {
        // ---- classical leg -------------------------------------------------
        if (config.mode != RunMode::quantum) {
            MinimizeOptions mopt;
            mopt.grad_tol = config.classical.grad_tol;
            mopt.max_iter = config.classical.max_iter;
            mopt.polish = config.classical.polish;
            const auto ms = multi_start(cell, config.classical.n_starts, config.seed, mopt);
            oracle = ms.best;
            result.classical_energy = ms.best.energy;

            write_positions_csv(result.dir / "positions.csv", ms.best, cell, stamp);

            json jc;
            jc["energy"] = ms.best.energy;
            jc["n_starts"] = ms.n_starts;
            jc["n_converged"] = ms.n_converged;
            jc["n_distinct_minima"] = static_cast<int>(ms.minima.size());
            jc["hessian_min_eig"] = projected_hessian_min_eig(ms.best.positions, cell);
            if (config.n_electrons >= 7) {
                const auto order = hexagonal_order(ms.best.positions, cell);
                result.classical_order = order;
                jc["psi6"] = order.psi6;
                jc["neighbor_distance_cv"] = order.neighbor_distance_cv;
            }
            report["classical"] = jc;

            if (config.mode == RunMode::classical) {
                json lat;
                lat["format"] = "wigner2d-lattice-v1";
                lat["source"] = "classical-positions";
                lat["config_hash"] = result.hash;
                lat["code_version"] = WIGNER2D_VERSION;
                json sites = json::array();
                for (const auto& p : ms.best.positions)
                    sites.push_back({{"x", p.x}, {"y", p.y}});
                lat["sites"] = sites;
                if (result.classical_order) {
                    lat["psi6"] = result.classical_order->psi6;
                    lat["neighbor_distance_cv"] = result.classical_order->neighbor_distance_cv;
                }
                write_text(result.dir / "lattice.json", lat.dump(2) + "\n");
            }
        }

        // ---- quantum leg ---------------------------------------------------
        if (config.mode != RunMode::classical) {
            const auto basis = build_basis(cell, config.basis.nx, config.basis.ny, config.basis.xi);
            const auto grid =
                make_quadrature(cell, config.basis.nx, config.basis.ny, config.quadrature.mx,
                                config.quadrature.my);

            TableOptions topt;
            topt.self_check = true;
            topt.pin.q = config.scf.pin_charge;
            topt.pin.site = make_point(0.0, 0.0, cell);

            const std::uint64_t thash = tables_content_hash(basis, grid, topt);
            const fs::path cache_dir = fs::path(config.out) / "cache";
            fs::create_directories(cache_dir);
            const fs::path cache_file = cache_dir / ("tables-" + hex16(thash) + ".bin");

            std::optional<IntegralTables> tables = load_tables(cache_file, thash);
            const bool cache_hit = tables.has_value();
            if (!tables) {
                tables = build_tables(basis, grid, topt);
                save_tables(cache_file, *tables, thash);
            }

            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(tables->S);
            const auto& seig = ses.eigenvalues();
            int kept = 0;
            for (int i = 0; i < seig.size(); ++i)
                if (seig(i) > config.scf.lindep_tol) ++kept;
            report["integrals"] = {{"basis_functions", basis.size()},
                                   {"quadrature", {grid.mx, grid.my}},
                                   {"cache", cache_hit ? "hit" : "miss"},
                                   {"cache_file", cache_file.string()},
                                   {"stored_eris", tables->eri.stored()},
                                   {"overlap_min_eig", seig(0)},
                                   {"overlap_max_eig", seig(seig.size() - 1)},
                                   {"orthogonal_kept", kept}};

            ScfOptions sopt = config.scf;
            sopt.seed = config.seed;
            const auto res = two_stage_protocol(*tables, config.n_electrons, sopt);
            result.hf_energy = res.final_state.energy;

            json jscf;
            if (res.stage1) {
                jscf["stage1"] = {{"energy", res.stage1->energy},
                                  {"iterations", res.stage1->iterations},
                                  {"commutator", res.stage1->commutator}};
            }
            jscf["final"] = {{"energy", res.final_state.energy},
                             {"iterations", res.final_state.iterations},
                             {"commutator", res.final_state.commutator}};
            jscf["converged"] = res.final_state.converged;
            if (result.classical_energy)
                jscf["minus_classical"] = res.final_state.energy - *result.classical_energy;
            report["scf"] = jscf;

            const auto density = density_from_state(res.final_state, basis, grid);
            write_density(result.dir / "density.dat", density, stamp);
            report["density"] = {{"grid", {density.mx, density.my}},
                                 {"normalization", density.normalization},
                                 {"max", density.values.maxCoeff()}};

            const auto lattice = build_lattice_report(density, config.n_electrons, oracle);
            result.lattice = lattice;

            json lat;
            lat["format"] = "wigner2d-lattice-v1";
            lat["source"] = "density-peaks";
            lat["config_hash"] = result.hash;
            lat["code_version"] = WIGNER2D_VERSION;
            lat["peaks"] = peaks_to_json(lattice.peaks);
            lat["matched_rms"] = lattice.matched_rms ? json(*lattice.matched_rms) : json();
            lat["psi6"] = lattice.psi6 ? json(*lattice.psi6) : json();
            lat["neighbor_distance_cv"] =
                lattice.neighbor_distance_cv ? json(*lattice.neighbor_distance_cv) : json();
            lat["inequivalence_classes"] = lattice.inequivalence_classes;
            write_text(result.dir / "lattice.json", lat.dump(2) + "\n");
            report["lattice"] = lat;
        }
    } catch (const GridTooCoarse& e) {
        report["status"] = "config_error";
        report["error"] = e.what();
        finish(RunResult::Status::ok, "");
        throw ConfigError("quadrature", e.what());
    } catch (const LinearDependenceCollapse& e) {
        report["status"] = "config_error";
        report["error"] = e.what();
        finish(RunResult::Status::ok, "");
        throw ConfigError("basis", e.what());
    } catch (const NotConverged& e) {
        return finish(RunResult::Status::not_converged, e.what());
    } catch (const MinimizeFailure& e) {
        return finish(RunResult::Status::not_converged, e.what());
    } catch (const PeakCountMismatch& e) {
        return finish(RunResult::Status::analysis_error, e.what());
    } catch (const NormalizationDrift& e) {
        return finish(RunResult::Status::analysis_error, e.what());
    } catch (const TooFewPeaks& e) {
        return finish(RunResult::Status::analysis_error, e.what());
    } catch (const CountMismatch& e) {
        return finish(RunResult::Status::analysis_error, e.what());
    }

    return finish(RunResult::Status::ok, "");
}

} // namespace wigner
