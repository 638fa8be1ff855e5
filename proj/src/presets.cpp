#include <cmath>

#include "wigner/runner.hpp"

namespace wigner {

namespace {

RunConfig square_classical(int n) {
    RunConfig c;
    c.mode = RunMode::classical;
    c.n_electrons = n;
    return c;
}

RunConfig square_quantum(int n) {
    RunConfig c;
    c.mode = RunMode::quantum;
    c.n_electrons = n;
    c.basis.nx = c.basis.ny = 20;
    return c;
}

RunConfig desk_quantum(int n) {
    RunConfig c;
    c.mode = RunMode::quantum;
    c.n_electrons = n;
    c.basis.nx = c.basis.ny = 10;
    return c;
}

std::vector<Preset> make_presets() {
    std::vector<Preset> out;
    for (int n = 1; n <= 20; ++n) {
        out.push_back({"paper-n" + std::to_string(n) + "-square",
                       "classical, N=" + std::to_string(n) + ", square cell, 50 starts",
                       square_classical(n)});
    }
    for (int n = 1; n <= 20; ++n) {
        out.push_back({"paper-n" + std::to_string(n) + "-square-quantum",
                       "quantum, N=" + std::to_string(n) + ", square cell, 20x20 basis",
                       square_quantum(n)});
    }

    RunConfig hex = square_classical(16);
    hex.aspect = std::sqrt(3.0) / 2.0;
    out.push_back({"paper-n16-hex",
                   "classical, N=16, aspect sqrt(3)/2 cell, 50 starts", hex});

    RunConfig hexq = hex;
    hexq.mode = RunMode::quantum;
    hexq.basis.nx = 22;
    hexq.basis.ny = 19;
    out.push_back({"paper-n16-hex-quantum",
                   "quantum, N=16, aspect sqrt(3)/2 cell, 22x19 basis", hexq});

    for (int n = 1; n <= 6; ++n) {
        out.push_back({"desk-n" + std::to_string(n) + "-square",
                       "quantum, N=" + std::to_string(n) +
                           ", square cell, reduced 10x10 basis (test-machine scale)",
                       desk_quantum(n)});
    }
    return out;
}

} // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> table = make_presets();
    return table;
}

std::optional<RunConfig> find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return p.config;
    return std::nullopt;
}

} // namespace wigner
