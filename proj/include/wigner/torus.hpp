#pragma once

#include <array>

namespace wigner {

/// Rectangular Clifford supercell. Cell area follows the 2D Wigner-Seitz
/// convention lx*ly = N * pi * rs^2 (area per electron = pi rs^2).
struct TorusCell {
    double lx = 0.0;      // bohr
    double ly = 0.0;      // bohr
    int n_electrons = 0;
    double rs = 0.0;      // bohr

    bool valid() const;
    double area() const { return lx * ly; }
    double min_edge() const { return lx < ly ? lx : ly; }
    bool is_square(double rel_tol = 1e-12) const;
};

/// Point on the torus, stored canonically reduced into [0,lx) x [0,ly).
struct TorusPoint {
    double x = 0.0;
    double y = 0.0;
};

// reduce a coordinate into [0, L)
double wrap_coord(double x, double length);

TorusPoint make_point(double x, double y, const TorusCell& cell);

// minimum-image Cartesian displacement b - a, components in (-L/2, L/2]
std::array<double, 2> min_image(const TorusPoint& a, const TorusPoint& b,
                                const TorusCell& cell);

/// Renormalized (embedding-space) distance:
///   r = (1/pi) sqrt( Lx^2 sin^2(pi dx/Lx) + Ly^2 sin^2(pi dy/Ly) )
/// Smooth and exactly periodic in both coordinates.
double renormalized_distance(const TorusPoint& a, const TorusPoint& b,
                             const TorusCell& cell);

// same, from a raw displacement (dx, dy)
double renormalized_distance_delta(double dx, double dy, const TorusCell& cell);

/// Gradient of renormalized_distance with respect to a's coordinates.
/// Throws CoincidentPoints at r = 0, where the gradient is undefined.
std::array<double, 2> distance_gradient(const TorusPoint& a, const TorusPoint& b,
                                        const TorusCell& cell);

/// Cell with lx*ly = n*pi*rs^2 and ly/lx = aspect.
TorusCell cell_from_rs(double rs, int n_electrons, double aspect);

} // namespace wigner
