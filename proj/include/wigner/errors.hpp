#pragma once

#include <stdexcept>
#include <string>

namespace wigner {

// Two points coincide where a pairwise 1/r (or its gradient) is needed.
struct CoincidentPoints : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Quadrature self-check failed: doubling the grid still moves matrix elements.
struct GridTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fewer orthogonalized basis vectors survive the overlap threshold than electrons.
struct LinearDependenceCollapse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PeakCountMismatch : std::runtime_error {
    int found;
    PeakCountMismatch(int found_, int expected)
        : std::runtime_error("peak count mismatch: found " + std::to_string(found_) +
                             ", expected " + std::to_string(expected)),
          found(found_) {}
};

struct CountMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TooFewPeaks : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integrated density drifted away from the electron count.
struct NormalizationDrift : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_, const std::string& reason)
        : std::runtime_error("config error: " + field_ + ": " + reason),
          field(std::move(field_)) {}
};

} // namespace wigner
