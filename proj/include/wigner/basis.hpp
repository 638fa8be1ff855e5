#pragma once

#include <Eigen/Dense>

#include <vector>

#include "wigner/torus.hpp"

namespace wigner {

/// Regular nx*ny grid of periodic gaussians g_i(p) = exp(-alpha*d(p,c_i)^2),
/// where d is the renormalized torus distance. The shared exponent follows
/// the overlap rule alpha = xi/delta^2 with delta = min(dx, dy).
/// Function index i = a*ny + b for center (a*dx, b*dy).
struct BasisSet {
    TorusCell cell;
    int nx = 0, ny = 0;
    double xi = 0.0;
    double alpha = 0.0;
    double dx = 0.0, dy = 0.0; // center spacings lx/nx, ly/ny

    int size() const { return nx * ny; }
    int index(int a, int b) const { return a * ny + b; }
    int xslot(int i) const { return i / ny; }
    int yslot(int i) const { return i % ny; }
    TorusPoint center(int i) const { return {xslot(i) * dx, yslot(i) * dy}; }
};

BasisSet build_basis(const TorusCell& cell, int nx, int ny, double xi = 0.8);

/// Amplitude of one basis function at a point (periodic in the point).
double basis_value(const BasisSet& basis, int i, const TorusPoint& p);

/// P x Q amplitude matrix over a list of points.
Eigen::MatrixXd evaluate_basis(const BasisSet& basis, const std::vector<TorusPoint>& pts);

/// The gaussians factor over the two axes:
///   g_i(x,y) = Gx[a_i](x) * Gy[b_i](y),
///   Gx[a](x) = exp(-alpha*(lx/pi)^2 sin^2(pi*(x - a*dx)/lx)).
/// These return the 1D factors tabulated on m uniform points (row = center
/// slot, column = grid point), and their x-/y-derivatives. Everything the
/// integral engine needs reduces to products of these tables.
Eigen::MatrixXd profiles_x(const BasisSet& basis, int mx);
Eigen::MatrixXd profiles_y(const BasisSet& basis, int my);
Eigen::MatrixXd dprofiles_x(const BasisSet& basis, int mx);
Eigen::MatrixXd dprofiles_y(const BasisSet& basis, int my);

} // namespace wigner
