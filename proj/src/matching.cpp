#include "wigner/matching.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "wigner/errors.hpp"

namespace wigner {

TorusPoint PointGroupOp::apply(const TorusPoint& p, const TorusCell& cell) const {
    double x = swap_xy ? p.y : p.x;
    double y = swap_xy ? p.x : p.y;
    return make_point(sx * x, sy * y, cell);
}

std::vector<PointGroupOp> cell_point_group(const TorusCell& cell) {
    std::vector<PointGroupOp> ops;
    for (int sx : {1, -1})
        for (int sy : {1, -1})
            ops.push_back({sx, sy, false});
    if (cell.is_square()) {
        for (int sx : {1, -1})
            for (int sy : {1, -1})
                ops.push_back({sx, sy, true});
    }
    return ops;
}

// Hungarian algorithm with potentials, O(n^3). 1-based internals.
std::vector<int> hungarian_assign(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assign[p[j] - 1] = j - 1;
    return assign;
}

namespace {

// Sum of squared renormalized distances for a fixed assignment, as a function
// of a rigid translation t of the transformed set. Separable in tx and ty and
// each part is a sum of shifted cosines, so the optimal t has a closed form
// (circular mean of the per-pair offsets).
void optimal_translation(const std::vector<double>& bx, const std::vector<double>& by,
                         const std::vector<TorusPoint>& ref, const std::vector<int>& assign,
                         const TorusCell& cell, double& tx, double& ty) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    std::complex<double> wx(0.0, 0.0), wy(0.0, 0.0);
    const int n = static_cast<int>(assign.size());
    for (int i = 0; i < n; ++i) {
        const double ux = ref[assign[i]].x - bx[i];
        const double uy = ref[assign[i]].y - by[i];
        wx += std::polar(1.0, two_pi * ux / cell.lx);
        wy += std::polar(1.0, two_pi * uy / cell.ly);
    }
    if (std::abs(wx) > 0.0) tx = cell.lx / two_pi * std::arg(wx);
    if (std::abs(wy) > 0.0) ty = cell.ly / two_pi * std::arg(wy);
}

} // namespace

double matched_rms(const std::vector<TorusPoint>& pts, const std::vector<TorusPoint>& ref,
                   const TorusCell& cell) {
    if (pts.size() != ref.size())
        throw CountMismatch("matched_rms: point sets have different sizes");
    const int n = static_cast<int>(pts.size());
    if (n == 0) return 0.0;

    const auto ops = cell_point_group(cell);
    std::vector<double> bx(n), by(n), cost(static_cast<size_t>(n) * n);
    double best = std::numeric_limits<double>::infinity();

    for (const auto& op : ops) {
        for (int i = 0; i < n; ++i) {
            TorusPoint q = op.apply(pts[i], cell);
            bx[i] = q.x;
            by[i] = q.y;
        }
        for (int anchor = 0; anchor < n; ++anchor) {
            double tx = ref[anchor].x - bx[0];
            double ty = ref[anchor].y - by[0];
            std::vector<int> assign;
            for (int round = 0; round < 3; ++round) {
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k) {
                        const double d = renormalized_distance_delta(
                            bx[i] + tx - ref[k].x, by[i] + ty - ref[k].y, cell);
                        cost[static_cast<size_t>(i) * n + k] = d * d;
                    }
                assign = hungarian_assign(cost, n);
                if (round < 2) optimal_translation(bx, by, ref, assign, cell, tx, ty);
            }
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = renormalized_distance_delta(bx[i] + tx - ref[assign[i]].x,
                                                             by[i] + ty - ref[assign[i]].y, cell);
                sum += d * d;
            }
            best = std::min(best, std::sqrt(sum / n));
        }
    }
    return best;
}

} // namespace wigner
