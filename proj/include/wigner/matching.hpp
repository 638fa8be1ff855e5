#pragma once

#include <vector>

#include "wigner/torus.hpp"

namespace wigner {

/// Point-group operation of the cell acting about the origin.
/// Maps (x,y) -> (sx*x, sy*y), with x/y swapped first when swap_xy is set.
struct PointGroupOp {
    int sx = 1;
    int sy = 1;
    bool swap_xy = false;

    TorusPoint apply(const TorusPoint& p, const TorusCell& cell) const;
};

/// D2 for a rectangle (4 ops); D4 when the cell is square (8 ops).
std::vector<PointGroupOp> cell_point_group(const TorusCell& cell);

/// Minimum-cost perfect assignment (Hungarian, O(n^3)).
/// cost is row-major n*n; returns the column assigned to each row.
std::vector<int> hungarian_assign(const std::vector<double>& cost, int n);

/// RMS displacement between two equal-size point sets on the torus,
/// minimized over global translations, the cell point group, and particle
/// permutations. Throws CountMismatch on unequal sizes.
double matched_rms(const std::vector<TorusPoint>& pts,
                   const std::vector<TorusPoint>& ref,
                   const TorusCell& cell);

} // namespace wigner
