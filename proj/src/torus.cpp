#include "wigner/torus.hpp"

#include <cmath>
#include <stdexcept>

#include "wigner/errors.hpp"

namespace wigner {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

bool TorusCell::valid() const {
    if (!(lx > 0.0) || !(ly > 0.0) || n_electrons < 1 || !(rs > 0.0)) return false;
    double target = n_electrons * kPi * rs * rs;
    return std::abs(lx * ly - target) <= 1e-9 * target;
}

bool TorusCell::is_square(double rel_tol) const {
    return std::abs(lx - ly) <= rel_tol * std::max(lx, ly);
}

double wrap_coord(double x, double length) {
    double y = x - length * std::floor(x / length);
    if (y >= length) y -= length;  // guards x slightly below a multiple of L
    if (y < 0.0) y = 0.0;
    return y;
}

TorusPoint make_point(double x, double y, const TorusCell& cell) {
    return TorusPoint{wrap_coord(x, cell.lx), wrap_coord(y, cell.ly)};
}

std::array<double, 2> min_image(const TorusPoint& a, const TorusPoint& b,
                                const TorusCell& cell) {
    double dx = b.x - a.x;
    double dy = b.y - a.y;
    dx -= cell.lx * std::nearbyint(dx / cell.lx);
    dy -= cell.ly * std::nearbyint(dy / cell.ly);
    return {dx, dy};
}

double renormalized_distance_delta(double dx, double dy, const TorusCell& cell) {
    // |dx| keeps r(a,b) and r(b,a) bit-identical
    const double sx = (cell.lx / kPi) * std::sin(kPi * std::fabs(dx) / cell.lx);
    const double sy = (cell.ly / kPi) * std::sin(kPi * std::fabs(dy) / cell.ly);
    return std::sqrt(sx * sx + sy * sy);
}

double renormalized_distance(const TorusPoint& a, const TorusPoint& b,
                             const TorusCell& cell) {
    return renormalized_distance_delta(a.x - b.x, a.y - b.y, cell);
}

std::array<double, 2> distance_gradient(const TorusPoint& a, const TorusPoint& b,
                                        const TorusCell& cell) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double r = renormalized_distance_delta(dx, dy, cell);
    if (r == 0.0)
        throw CoincidentPoints("distance_gradient: r = 0");
    // d(r^2)/dxa = (Lx/pi) sin(2 pi dx / Lx)
    const double gx = (cell.lx / (2.0 * kPi * r)) * std::sin(2.0 * kPi * dx / cell.lx);
    const double gy = (cell.ly / (2.0 * kPi * r)) * std::sin(2.0 * kPi * dy / cell.ly);
    return {gx, gy};
}

TorusCell cell_from_rs(double rs, int n_electrons, double aspect) {
    if (!(rs > 0.0)) throw std::invalid_argument("cell_from_rs: rs must be > 0");
    if (n_electrons < 1) throw std::invalid_argument("cell_from_rs: n_electrons must be >= 1");
    if (!(aspect > 0.0)) throw std::invalid_argument("cell_from_rs: aspect must be > 0");
    const double area = n_electrons * kPi * rs * rs;
    TorusCell cell;
    cell.lx = std::sqrt(area / aspect);
    cell.ly = aspect * cell.lx;
    cell.n_electrons = n_electrons;
    cell.rs = rs;
    return cell;
}

} // namespace wigner
