#include "wigner/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace wigner {

namespace {
constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd profiles_1d(int n, double spacing, double length, double alpha, int m,
                            bool derivative) {
    if (m < 1) throw std::invalid_argument("profiles: grid size must be positive");
    const double h = length / m;
    const double s = length / kPi;
    Eigen::MatrixXd out(n, m);
    for (int a = 0; a < n; ++a) {
        const double c = a * spacing;
        for (int p = 0; p < m; ++p) {
            const double t = kPi * (p * h - c) / length;
            const double g = std::exp(-alpha * s * s * std::sin(t) * std::sin(t));
            out(a, p) = derivative ? -alpha * s * std::sin(2.0 * t) * g : g;
        }
    }
    return out;
}
} // namespace

BasisSet build_basis(const TorusCell& cell, int nx, int ny, double xi) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("build_basis: nx, ny must be >= 2");
    if (!(xi > 0.0)) throw std::invalid_argument("build_basis: xi must be positive");
    BasisSet b;
    b.cell = cell;
    b.nx = nx;
    b.ny = ny;
    b.xi = xi;
    b.dx = cell.lx / nx;
    b.dy = cell.ly / ny;
    const double delta = std::min(b.dx, b.dy);
    b.alpha = xi / (delta * delta);
    return b;
}

double basis_value(const BasisSet& basis, int i, const TorusPoint& p) {
    const double d = renormalized_distance(p, basis.center(i), basis.cell);
    return std::exp(-basis.alpha * d * d);
}

Eigen::MatrixXd evaluate_basis(const BasisSet& basis, const std::vector<TorusPoint>& pts) {
    Eigen::MatrixXd m(basis.size(), static_cast<int>(pts.size()));
    for (int q = 0; q < static_cast<int>(pts.size()); ++q)
        for (int i = 0; i < basis.size(); ++i) m(i, q) = basis_value(basis, i, pts[q]);
    return m;
}

Eigen::MatrixXd profiles_x(const BasisSet& b, int mx) {
    return profiles_1d(b.nx, b.dx, b.cell.lx, b.alpha, mx, false);
}

Eigen::MatrixXd profiles_y(const BasisSet& b, int my) {
    return profiles_1d(b.ny, b.dy, b.cell.ly, b.alpha, my, false);
}

Eigen::MatrixXd dprofiles_x(const BasisSet& b, int mx) {
    return profiles_1d(b.nx, b.dx, b.cell.lx, b.alpha, mx, true);
}

Eigen::MatrixXd dprofiles_y(const BasisSet& b, int my) {
    return profiles_1d(b.ny, b.dy, b.cell.ly, b.alpha, my, true);
}

} // namespace wigner
