#include "wigner/integrals.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <type_traits>

#include "wigner/errors.hpp"

namespace wigner {

namespace {

constexpr double kPi = 3.14159265358979323846;

// index of the unordered pair (i,j), i <= j, among n(n+1)/2 pairs
inline std::int64_t pair_index(int i, int j, int n) {
    return static_cast<std::int64_t>(i) * n - static_cast<std::int64_t>(i) * (i + 1) / 2 + j;
}

// --- Gauss-Legendre nodes/weights on (-1,1), Newton on the recurrence ---
struct GlRule {
    std::vector<double> x, w;
};

GlRule gauss_legendre(int n) {
    GlRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return r;
}

// --- small serial FFTW wrappers ---
struct Fft1dR2c {
    int m;
    double* in;
    fftw_complex* out;
    fftw_plan plan;

    explicit Fft1dR2c(int m_) : m(m_) {
        in = fftw_alloc_real(m);
        out = fftw_alloc_complex(m / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(m, in, out, FFTW_ESTIMATE);
    }
    ~Fft1dR2c() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    void run(const double* src, std::complex<double>* dst) {
        std::memcpy(in, src, sizeof(double) * m);
        fftw_execute(plan);
        for (int k = 0; k <= m / 2; ++k) dst[k] = {out[k][0], out[k][1]};
    }
};

// r2c FFT of each unordered-pair product of profile rows.
// prof: n x m (Eigen, column = grid point). Output row A=(a<=a') has m/2+1
// complex entries.
std::vector<std::complex<double>> pair_profile_fft(const Eigen::MatrixXd& prof) {
    const int n = static_cast<int>(prof.rows());
    const int m = static_cast<int>(prof.cols());
    const int np = n * (n + 1) / 2;
    const int nk = m / 2 + 1;
    std::vector<std::complex<double>> out(static_cast<std::size_t>(np) * nk);
    Fft1dR2c fft(m);
    std::vector<double> row(m);
    for (int a = 0; a < n; ++a)
        for (int b = a; b <= n - 1; ++b) {
            for (int p = 0; p < m; ++p) row[p] = prof(a, p) * prof(b, p);
            fft.run(row.data(), &out[static_cast<std::size_t>(pair_index(a, b, n)) * nk]);
        }
    return out;
}

// real pair-product profiles as a matrix (np x m), used by Vpin and the
// direct reference path
Eigen::MatrixXd pair_profiles(const Eigen::MatrixXd& prof) {
    const int n = static_cast<int>(prof.rows());
    const int m = static_cast<int>(prof.cols());
    Eigen::MatrixXd out(n * (n + 1) / 2, m);
    for (int a = 0; a < n; ++a)
        for (int b = a; b <= n - 1; ++b)
            out.row(pair_index(a, b, n)) = prof.row(a).cwiseProduct(prof.row(b));
    return out;
}

} // namespace

QuadratureGrid make_quadrature(const TorusCell& cell, int nx, int ny, int mx, int my) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("make_quadrature: bad basis counts");
    const int target = 4 * std::max(nx, ny);
    if (mx == 0) {
        int k = (target + nx - 1) / nx;
        if ((nx * k) % 2 != 0) ++k;
        mx = nx * k;
    }
    if (my == 0) {
        int k = (target + ny - 1) / ny;
        if ((ny * k) % 2 != 0) ++k;
        my = ny * k;
    }
    if (mx < 2 * nx || my < 2 * ny)
        throw GridTooCoarse("quadrature grid below twice the basis resolution");
    if (mx % 2 != 0 || my % 2 != 0)
        throw std::invalid_argument("make_quadrature: counts must be even");
    QuadratureGrid g;
    g.mx = mx;
    g.my = my;
    g.hx = cell.lx / mx;
    g.hy = cell.ly / my;
    g.weight = g.hx * g.hy;
    return g;
}

namespace {

// integral of f(x,y)/d over the cell by Gauss-Legendre in polar-like
// coordinates; rho/d is analytic on each panel (d ~ rho at the origin), so
// convergence is geometric
template <class F>
double cell_integral_over_d(const TorusCell& cell, F&& f) {
    static const GlRule gl = gauss_legendre(64);
    auto panel = [&](double phi0, double phi1, bool x_boundary) {
        double acc = 0.0;
        for (int i = 0; i < 64; ++i) {
            const double phi = 0.5 * (phi1 + phi0) + 0.5 * (phi1 - phi0) * gl.x[i];
            const double r_max =
                x_boundary ? 0.5 * cell.lx / std::cos(phi) : 0.5 * cell.ly / std::sin(phi);
            double inner = 0.0;
            for (int k = 0; k < 64; ++k) {
                const double rho = 0.5 * r_max * (gl.x[k] + 1.0);
                const double x = rho * std::cos(phi), y = rho * std::sin(phi);
                const double d = renormalized_distance_delta(x, y, cell);
                inner += gl.w[k] * (rho / d) * f(x, y);
            }
            acc += gl.w[i] * 0.5 * (phi1 - phi0) * 0.5 * r_max * inner;
        }
        return acc;
    };
    const double phi_corner = std::atan2(cell.ly, cell.lx);
    const double quadrant = panel(0.0, phi_corner, true) + panel(phi_corner, 0.5 * kPi, false);
    return 4.0 * quadrant;
}

// periodic coordinate that matches x (resp. y) to second order at the origin;
// used for the second-moment constraints of the kernel regularization
inline double periodic_x(double x, double l) { return l / kPi * std::sin(kPi * x / l); }

} // namespace

double kernel_cell_integral(const TorusCell& cell) {
    return cell_integral_over_d(cell, [](double, double) { return 1.0; });
}

double KernelTable::vhat_at(int kx, int ky) const {
    kx = ((kx % mx) + mx) % mx;
    ky = ((ky % my) + my) % my;
    if (kx > mx / 2) kx = mx - kx;
    if (ky > my / 2) ky = my - ky;
    return vhat[static_cast<std::size_t>(kx) * (my / 2 + 1) + ky];
}

KernelTable coulomb_kernel_fourier(const TorusCell& cell, const QuadratureGrid& grid) {
    KernelTable kt;
    kt.mx = grid.mx;
    kt.my = grid.my;
    const int mx = grid.mx, my = grid.my;
    kt.v.assign(static_cast<std::size_t>(mx) * my, 0.0);

    // fill one quadrant and mirror so the array is even in each index exactly
    for (int p = 0; p <= mx / 2; ++p)
        for (int q = 0; q <= my / 2; ++q) {
            if (p == 0 && q == 0) continue;
            const double val = 1.0 / renormalized_distance_delta(p * grid.hx, q * grid.hy, cell);
            const int pm = (mx - p) % mx, qm = (my - q) % my;
            kt.v[static_cast<std::size_t>(p) * my + q] = val;
            kt.v[static_cast<std::size_t>(pm) * my + q] = val;
            kt.v[static_cast<std::size_t>(p) * my + qm] = val;
            kt.v[static_cast<std::size_t>(pm) * my + qm] = val;
        }

    // Regularization of the integrable singularity: adjust the origin sample
    // and its four axis neighbors so that quadrature with this kernel exactly
    // reproduces the integrals of 1/d weighted by 1, sx^2, and sy^2, where
    // sx = (lx/pi) sin(pi x/lx) is the periodic coordinate. Matching the
    // zeroth moment alone (a cell average) leaves an O(h) defect in every
    // convolution, and stopping there still leaves O(h^3); with the second
    // moments matched the error for smooth densities is O(h^5).
    const double sx1 = periodic_x(grid.hx, cell.lx), sy1 = periodic_x(grid.hy, cell.ly);
    double s0 = 0.0, s2x = 0.0, s2y = 0.0;
    for (int p = 0; p < mx; ++p) {
        const double wx = periodic_x(p * grid.hx, cell.lx);
        for (int q = 0; q < my; ++q) {
            const double val = kt.v[static_cast<std::size_t>(p) * my + q];
            const double wy = periodic_x(q * grid.hy, cell.ly);
            s0 += val;
            s2x += val * wx * wx;
            s2y += val * wy * wy;
        }
    }
    kt.cell_integral = kernel_cell_integral(cell);
    const double i2x =
        cell_integral_over_d(cell, [&](double x, double) {
            const double s = periodic_x(x, cell.lx);
            return s * s;
        });
    const double i2y =
        cell_integral_over_d(cell, [&](double, double y) {
            const double s = periodic_x(y, cell.ly);
            return s * s;
        });
    const double ax = (i2x / grid.weight - s2x) / (2.0 * sx1 * sx1);
    const double ay = (i2y / grid.weight - s2y) / (2.0 * sy1 * sy1);
    kt.origin_value = (kt.cell_integral / grid.weight - s0) - 2.0 * ax - 2.0 * ay;
    kt.v[0] = kt.origin_value;
    kt.v[static_cast<std::size_t>(1) * my] += ax;
    kt.v[static_cast<std::size_t>(mx - 1) * my] += ax;
    kt.v[1] += ay;
    kt.v[my - 1] += ay;

    // 2D r2c transform; coefficients are real for an even kernel
    double* in = fftw_alloc_real(static_cast<std::size_t>(mx) * my);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(mx) * (my / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_2d(mx, my, in, out, FFTW_ESTIMATE);
    std::memcpy(in, kt.v.data(), sizeof(double) * kt.v.size());
    fftw_execute(plan);
    const int nky = my / 2 + 1;
    kt.vhat.assign(static_cast<std::size_t>(mx / 2 + 1) * nky, 0.0);
    for (int kx = 0; kx <= mx / 2; ++kx)
        for (int ky = 0; ky < nky; ++ky)
            kt.vhat[static_cast<std::size_t>(kx) * nky + ky] =
                out[static_cast<std::size_t>(kx) * nky + ky][0];
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return kt;
}

namespace {

// 1D overlap/kinetic sums. Fast path (grid commensurate with the centers):
// the sums depend only on the center separation, indexed by min(d, n-d),
// which makes S and T bitwise symmetric and translation-homogeneous.
struct Sums1d {
    bool by_separation = false;
    int n = 0;
    std::vector<double> s, t; // by separation (size n/2+1) or by pair index
};

Sums1d sums_1d(const Eigen::MatrixXd& g, const Eigen::MatrixXd& dg, int m_per_center) {
    Sums1d out;
    const int n = static_cast<int>(g.rows());
    out.n = n;
    out.by_separation = (m_per_center > 0);
    if (out.by_separation) {
        out.s.resize(n / 2 + 1);
        out.t.resize(n / 2 + 1);
        for (int d = 0; d <= n / 2; ++d) {
            out.s[d] = g.row(0).dot(g.row(d));
            out.t[d] = dg.row(0).dot(dg.row(d));
        }
    } else {
        const int np = n * (n + 1) / 2;
        out.s.resize(np);
        out.t.resize(np);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                out.s[pair_index(a, b, n)] = g.row(a).dot(g.row(b));
                out.t[pair_index(a, b, n)] = dg.row(a).dot(dg.row(b));
            }
    }
    return out;
}

inline double lookup(const Sums1d& z, const std::vector<double>& arr, int a, int b) {
    if (z.by_separation) {
        int d = std::abs(a - b);
        d = std::min(d, z.n - d);
        return arr[d];
    }
    return arr[pair_index(std::min(a, b), std::max(a, b), z.n)];
}

} // namespace

void overlap_and_kinetic(const BasisSet& basis, const QuadratureGrid& grid, Eigen::MatrixXd& S,
                         Eigen::MatrixXd& T, bool self_check) {
    const int P = basis.size();
    const auto gx = profiles_x(basis, grid.mx), gy = profiles_y(basis, grid.my);
    const auto dgx = dprofiles_x(basis, grid.mx), dgy = dprofiles_y(basis, grid.my);
    const bool commensurate = (grid.mx % basis.nx == 0) && (grid.my % basis.ny == 0);
    const Sums1d zx = sums_1d(gx, dgx, commensurate ? grid.mx / basis.nx : 0);
    const Sums1d zy = sums_1d(gy, dgy, commensurate ? grid.my / basis.ny : 0);

    S.resize(P, P);
    T.resize(P, P);
    for (int i = 0; i < P; ++i) {
        const int ai = basis.xslot(i), bi = basis.yslot(i);
        for (int j = 0; j < P; ++j) {
            const int aj = basis.xslot(j), bj = basis.yslot(j);
            const double sx = lookup(zx, zx.s, ai, aj), sy = lookup(zy, zy.s, bi, bj);
            const double tx = lookup(zx, zx.t, ai, aj), ty = lookup(zy, zy.t, bi, bj);
            S(i, j) = grid.weight * sx * sy;
            T(i, j) = 0.5 * grid.weight * (tx * sy + sx * ty);
        }
    }

    if (self_check) {
        const QuadratureGrid g2 =
            make_quadrature(basis.cell, basis.nx, basis.ny, 2 * grid.mx, 2 * grid.my);
        Eigen::MatrixXd S2, T2;
        overlap_and_kinetic(basis, g2, S2, T2, false);
        if ((S - S2).cwiseAbs().maxCoeff() > 1e-9)
            throw GridTooCoarse("doubling the quadrature grid moved an overlap entry by > 1e-9");
    }
}

Eigen::MatrixXd pinning_potential(const BasisSet& basis, const QuadratureGrid& grid,
                                  const KernelTable& kernel, double q, TorusPoint site) {
    if (q < 0.0) throw std::invalid_argument("pinning_potential: charge must be >= 0");
    const int P = basis.size();
    if (q == 0.0) return Eigen::MatrixXd::Zero(P, P);
    site = make_point(site.x, site.y, basis.cell);

    const int mx = grid.mx, my = grid.my;
    Eigen::MatrixXd w(mx, my);
    const double ix = site.x / grid.hx, iy = site.y / grid.hy;
    const int px = static_cast<int>(std::lround(ix)) % mx, py = static_cast<int>(std::lround(iy)) % my;
    const bool aligned =
        std::fabs(ix - std::lround(ix)) < 1e-9 && std::fabs(iy - std::lround(iy)) < 1e-9;
    for (int p = 0; p < mx; ++p)
        for (int s = 0; s < my; ++s) {
            if (aligned) {
                // reuse the regularized kernel samples, shifted to the site
                w(p, s) = kernel.v[static_cast<std::size_t>((p - px + mx) % mx) * my +
                                   (s - py + my) % my];
            } else {
                const double d =
                    renormalized_distance_delta(p * grid.hx - site.x, s * grid.hy - site.y,
                                                basis.cell);
                w(p, s) = (d < 1e-12) ? kernel.origin_value : 1.0 / d;
            }
        }

    const Eigen::MatrixXd xp = pair_profiles(profiles_x(basis, mx)); // npx x mx
    const Eigen::MatrixXd yp = pair_profiles(profiles_y(basis, my)); // npy x my
    const Eigen::MatrixXd k = xp * w * yp.transpose();               // npx x npy

    Eigen::MatrixXd vpin(P, P);
    for (int i = 0; i < P; ++i) {
        const int ai = basis.xslot(i), bi = basis.yslot(i);
        for (int j = 0; j < P; ++j) {
            const int aj = basis.xslot(j), bj = basis.yslot(j);
            const auto a = pair_index(std::min(ai, aj), std::max(ai, aj), basis.nx);
            const auto b = pair_index(std::min(bi, bj), std::max(bi, bj), basis.ny);
            vpin(i, j) = -q * grid.weight * k(a, b);
        }
    }
    return vpin;
}

// ---------------- EriStore ----------------

void EriStore::init(int p) {
    p_ = p;
    npair_ = static_cast<std::int64_t>(p) * (p + 1) / 2;
    dense_ = (p <= kDenseLimit);
    decode_.assign(npair_, {0, 0});
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) decode_[pair_index(i, j, p)] = {i, j};
}

std::int64_t EriStore::canonical_pairpair(int i, int j, int k, int l) const {
    if (i > j) std::swap(i, j);
    if (k > l) std::swap(k, l);
    std::int64_t pij = pair_index(i, j, p_), pkl = pair_index(k, l, p_);
    if (pij > pkl) std::swap(pij, pkl);
    return pij * npair_ + pkl;
}

double EriStore::get(int i, int j, int k, int l) const {
    const std::int64_t key = canonical_pairpair(i, j, k, l);
    if (dense_) {
        const std::int64_t pij = key / npair_, pkl = key % npair_;
        return dense_vals_[pkl * (pkl + 1) / 2 + pij];
    }
    const auto it = std::lower_bound(keys_.begin(), keys_.end(), static_cast<std::uint64_t>(key));
    if (it == keys_.end() || *it != static_cast<std::uint64_t>(key)) return 0.0;
    return vals_[it - keys_.begin()];
}

std::size_t EriStore::stored() const {
    if (!dense_) return keys_.size();
    std::size_t n = 0;
    for (double v : dense_vals_)
        if (v != 0.0) ++n;
    return n;
}

// ---------------- FFT-factorized ERI build ----------------

namespace {

// spectral dot with the half-spectrum doubling factors
inline double spectral_dot(const std::complex<double>* xa, const std::complex<double>* xb,
                           const double* wrow, int nkx, int mx) {
    double acc = 0.0;
    for (int kx = 0; kx < nkx; ++kx) {
        const double re = xa[kx].real() * xb[kx].real() + xa[kx].imag() * xb[kx].imag();
        const double c = (kx == 0 || kx == mx / 2) ? 1.0 : 2.0;
        acc += c * re * wrow[kx];
    }
    return acc;
}

} // namespace

EriStore eri_build(const BasisSet& basis, const QuadratureGrid& grid, const KernelTable& kernel,
                   double screen_tol) {
    const int P = basis.size();
    EriStore store;
    store.init(P);

    const int mx = grid.mx, my = grid.my;
    const int nkx = mx / 2 + 1, nky = my / 2 + 1;
    const auto xhat = pair_profile_fft(profiles_x(basis, mx));
    const auto yhat = pair_profile_fft(profiles_y(basis, my));
    const int npy = basis.ny * (basis.ny + 1) / 2;
    const std::int64_t npyp = static_cast<std::int64_t>(npy) * (npy + 1) / 2;

    // W[B<=B'](kx) = sum_ky conj(Yhat_B) Yhat_B' Vhat(kx,ky); real because the
    // kernel coefficients are even in ky
    std::vector<double> w(static_cast<std::size_t>(npyp) * nkx);
    std::vector<std::pair<int, int>> bdecode(npyp);
    for (int b = 0, t = 0; b < npy; ++b)
        for (int b2 = b; b2 < npy; ++b2, ++t) bdecode[t] = {b, b2};
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < npyp; ++t) {
        const auto [b, b2] = bdecode[t];
        const std::complex<double>* ya = &yhat[static_cast<std::size_t>(b) * nky];
        const std::complex<double>* yb = &yhat[static_cast<std::size_t>(b2) * nky];
        double* row = &w[static_cast<std::size_t>(t) * nkx];
        for (int kx = 0; kx < nkx; ++kx) {
            const double* vrow = &kernel.vhat[static_cast<std::size_t>(kx) * nky];
            double acc = 0.0;
            for (int ky = 0; ky < nky; ++ky) {
                const double re = ya[ky].real() * yb[ky].real() + ya[ky].imag() * yb[ky].imag();
                const double c = (ky == 0 || ky == my / 2) ? 1.0 : 2.0;
                acc += c * re * vrow[ky];
            }
            row[kx] = acc;
        }
    }

    const double scale = grid.weight * grid.weight / (static_cast<double>(mx) * my);
    const std::int64_t npair = store.npair_;
    auto arow = [&](std::int64_t pij) {
        const auto [i, j] = store.decode_[pij];
        const int ai = basis.xslot(i), aj = basis.xslot(j);
        return &xhat[static_cast<std::size_t>(
                         pair_index(std::min(ai, aj), std::max(ai, aj), basis.nx)) *
                     nkx];
    };
    auto wrow = [&](std::int64_t pij, std::int64_t pkl) {
        const auto [i, j] = store.decode_[pij];
        const auto [k, l] = store.decode_[pkl];
        const auto b1 = pair_index(std::min(basis.yslot(i), basis.yslot(j)),
                                   std::max(basis.yslot(i), basis.yslot(j)), basis.ny);
        const auto b2 = pair_index(std::min(basis.yslot(k), basis.yslot(l)),
                                   std::max(basis.yslot(k), basis.yslot(l)), basis.ny);
        return &w[static_cast<std::size_t>(
                      pair_index(static_cast<int>(std::min(b1, b2)),
                                 static_cast<int>(std::max(b1, b2)), npy)) *
                  nkx];
    };

    // Schwarz diagonals
    std::vector<double> qv(npair);
#pragma omp parallel for schedule(static)
    for (std::int64_t pij = 0; pij < npair; ++pij) {
        const double d = scale * spectral_dot(arow(pij), arow(pij), wrow(pij, pij), nkx, mx);
        qv[pij] = std::sqrt(std::max(d, 0.0));
    }
    const double qmax = *std::max_element(qv.begin(), qv.end());
    std::vector<std::int64_t> plist;
    for (std::int64_t pij = 0; pij < npair; ++pij)
        if (qv[pij] * qmax >= screen_tol) plist.push_back(pij);
    const std::int64_t ns = static_cast<std::int64_t>(plist.size());

    if (store.dense_) {
        store.dense_vals_.assign(static_cast<std::size_t>(npair) * (npair + 1) / 2, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
        for (std::int64_t m = 0; m < ns; ++m) {
            const std::int64_t pij = plist[m];
            const auto* xa = arow(pij);
            for (std::int64_t n = m; n < ns; ++n) {
                const std::int64_t pkl = plist[n];
                if (qv[pij] * qv[pkl] < screen_tol) continue;
                store.dense_vals_[pkl * (pkl + 1) / 2 + pij] =
                    scale * spectral_dot(xa, arow(pkl), wrow(pij, pkl), nkx, mx);
            }
        }
    } else {
        std::vector<std::vector<std::pair<std::uint64_t, double>>> rows(ns);
#pragma omp parallel for schedule(dynamic, 4)
        for (std::int64_t m = 0; m < ns; ++m) {
            const std::int64_t pij = plist[m];
            const auto* xa = arow(pij);
            auto& out = rows[m];
            for (std::int64_t n = m; n < ns; ++n) {
                const std::int64_t pkl = plist[n];
                if (qv[pij] * qv[pkl] < screen_tol) continue;
                const double val = scale * spectral_dot(xa, arow(pkl), wrow(pij, pkl), nkx, mx);
                out.emplace_back(static_cast<std::uint64_t>(pij * npair + pkl), val);
            }
        }
        std::size_t total = 0;
        for (const auto& r : rows) total += r.size();
        store.keys_.reserve(total);
        store.vals_.reserve(total);
        for (const auto& r : rows)
            for (const auto& [k, v] : r) {
                store.keys_.push_back(k);
                store.vals_.push_back(v);
            }
    }
    return store;
}

// ---------------- direct (reference) path ----------------

double eri_direct_value(const BasisSet& basis, const QuadratureGrid& grid,
                        const KernelTable& kernel, int i, int j, int k, int l) {
    const int mx = grid.mx, my = grid.my;
    const auto gx = profiles_x(basis, mx), gy = profiles_y(basis, my);
    auto density = [&](int a, int b, std::vector<double>& rho) {
        const int ax = basis.xslot(a), ay = basis.yslot(a);
        const int bx = basis.xslot(b), by = basis.yslot(b);
        for (int p = 0; p < mx; ++p)
            for (int q = 0; q < my; ++q)
                rho[static_cast<std::size_t>(p) * my + q] =
                    gx(ax, p) * gx(bx, p) * gy(ay, q) * gy(by, q);
    };
    std::vector<double> rij(static_cast<std::size_t>(mx) * my), rkl(rij.size());
    density(i, j, rij);
    density(k, l, rkl);
    double acc = 0.0;
    for (int p = 0; p < mx; ++p)
        for (int q = 0; q < my; ++q) {
            const double a = rij[static_cast<std::size_t>(p) * my + q];
            if (a == 0.0) continue;
            double inner = 0.0;
            for (int p2 = 0; p2 < mx; ++p2) {
                const double* vrow = &kernel.v[static_cast<std::size_t>((p - p2 + mx) % mx) * my];
                const double* rrow = &rkl[static_cast<std::size_t>(p2) * my];
                for (int q2 = 0; q2 < my; ++q2) inner += vrow[(q - q2 + my) % my] * rrow[q2];
            }
            acc += a * inner;
        }
    return acc * grid.weight * grid.weight;
}

EriStore eri_build_direct(const BasisSet& basis, const QuadratureGrid& grid,
                          const KernelTable& kernel, double screen_tol) {
    const int P = basis.size();
    if (P > EriStore::kDenseLimit)
        throw std::invalid_argument("eri_build_direct: reference path is for small bases only");
    EriStore store;
    store.init(P);
    const int mx = grid.mx, my = grid.my;
    const std::int64_t npair = store.npair_;
    const std::size_t m = static_cast<std::size_t>(mx) * my;
    const auto gx = profiles_x(basis, mx), gy = profiles_y(basis, my);

    // pair densities and their kernel convolutions, both by explicit sums
    std::vector<double> rho(static_cast<std::size_t>(npair) * m);
    std::vector<double> u(static_cast<std::size_t>(npair) * m);
    for (std::int64_t t = 0; t < npair; ++t) {
        const auto [i, j] = store.decode_[t];
        const int ax = basis.xslot(i), ay = basis.yslot(i);
        const int bx = basis.xslot(j), by = basis.yslot(j);
        double* r = &rho[t * m];
        for (int p = 0; p < mx; ++p)
            for (int q = 0; q < my; ++q)
                r[static_cast<std::size_t>(p) * my + q] =
                    gx(ax, p) * gx(bx, p) * gy(ay, q) * gy(by, q);
        double* uu = &u[t * m];
        for (int p = 0; p < mx; ++p)
            for (int q = 0; q < my; ++q) {
                double acc = 0.0;
                for (int p2 = 0; p2 < mx; ++p2) {
                    const double* vrow =
                        &kernel.v[static_cast<std::size_t>((p - p2 + mx) % mx) * my];
                    const double* rrow = r + static_cast<std::size_t>(p2) * my;
                    for (int q2 = 0; q2 < my; ++q2) acc += vrow[(q - q2 + my) % my] * rrow[q2];
                }
                uu[static_cast<std::size_t>(p) * my + q] = acc;
            }
    }

    const double scale = grid.weight * grid.weight;
    std::vector<double> qv(npair);
    for (std::int64_t t = 0; t < npair; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s) acc += rho[t * m + s] * u[t * m + s];
        qv[t] = std::sqrt(std::max(scale * acc, 0.0));
    }
    const double qmax = *std::max_element(qv.begin(), qv.end());

    store.dense_vals_.assign(static_cast<std::size_t>(npair) * (npair + 1) / 2, 0.0);
    for (std::int64_t pij = 0; pij < npair; ++pij) {
        if (qv[pij] * qmax < screen_tol) continue;
        for (std::int64_t pkl = pij; pkl < npair; ++pkl) {
            if (qv[pij] * qv[pkl] < screen_tol) continue;
            double acc = 0.0;
            for (std::size_t s = 0; s < m; ++s) acc += rho[pij * m + s] * u[pkl * m + s];
            store.dense_vals_[pkl * (pkl + 1) / 2 + pij] = scale * acc;
        }
    }
    return store;
}

IntegralTables build_tables(const BasisSet& basis, const QuadratureGrid& grid,
                            const TableOptions& opt) {
    IntegralTables t;
    overlap_and_kinetic(basis, grid, t.S, t.T, opt.self_check);
    const KernelTable kernel = coulomb_kernel_fourier(basis.cell, grid);
    t.eri = eri_build(basis, grid, kernel, opt.screen_tol);
    if (opt.pin.q != 0.0)
        t.Vpin = pinning_potential(basis, grid, kernel, opt.pin.q, opt.pin.site);
    t.mx = grid.mx;
    t.my = grid.my;
    t.screen_tol = opt.screen_tol;
    return t;
}

// ---------------- cache ----------------

namespace {

constexpr char kMagic[8] = {'W', '2', 'D', 'T', 'B', 'L', '\r', '\n'};
constexpr unsigned char kVersion = 1;

struct Fnv1a {
    std::uint64_t h = 1469598103934665603ULL;
    void add_bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    }
    template <class T>
    void add(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        add_bytes(&v, sizeof v);
    }
};

template <class T>
void put(std::FILE* f, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::fwrite(&v, sizeof v, 1, f);
}

template <class T>
bool take(std::FILE* f, T& v) {
    return std::fread(&v, sizeof v, 1, f) == 1;
}

void put_matrix(std::FILE* f, const Eigen::MatrixXd& m) {
    const std::int32_t r = static_cast<std::int32_t>(m.rows());
    const std::int32_t c = static_cast<std::int32_t>(m.cols());
    put(f, r);
    put(f, c);
    std::fwrite(m.data(), sizeof(double), static_cast<std::size_t>(m.size()), f);
}

bool take_matrix(std::FILE* f, Eigen::MatrixXd& m) {
    std::int32_t r = 0, c = 0;
    if (!take(f, r) || !take(f, c) || r < 0 || c < 0) return false;
    m.resize(r, c);
    return std::fread(m.data(), sizeof(double), static_cast<std::size_t>(m.size()), f) ==
           static_cast<std::size_t>(m.size());
}

} // namespace

void save_store(std::FILE* f, const EriStore& e) {
    put(f, static_cast<std::uint8_t>(e.dense_ ? 1 : 0));
    put(f, static_cast<std::int32_t>(e.p_));
    if (e.dense_) {
        put(f, static_cast<std::uint64_t>(e.dense_vals_.size()));
        std::fwrite(e.dense_vals_.data(), sizeof(double), e.dense_vals_.size(), f);
    } else {
        put(f, static_cast<std::uint64_t>(e.keys_.size()));
        std::fwrite(e.keys_.data(), sizeof(std::uint64_t), e.keys_.size(), f);
        std::fwrite(e.vals_.data(), sizeof(double), e.vals_.size(), f);
    }
}

bool load_store(std::FILE* f, EriStore& e) {
    std::uint8_t dense = 0;
    std::int32_t p = 0;
    std::uint64_t n = 0;
    if (!take(f, dense) || !take(f, p) || !take(f, n) || p < 0) return false;
    e.init(p);
    if (dense != (e.dense_ ? 1 : 0)) return false;
    if (e.dense_) {
        if (n != static_cast<std::uint64_t>(e.npair_) * (e.npair_ + 1) / 2) return false;
        e.dense_vals_.resize(n);
        return std::fread(e.dense_vals_.data(), sizeof(double), n, f) == n;
    }
    e.keys_.resize(n);
    e.vals_.resize(n);
    return std::fread(e.keys_.data(), sizeof(std::uint64_t), n, f) == n &&
           std::fread(e.vals_.data(), sizeof(double), n, f) == n;
}

std::uint64_t tables_content_hash(const BasisSet& basis, const QuadratureGrid& grid,
                                  const TableOptions& opt) {
    Fnv1a h;
    h.add(basis.cell.lx);
    h.add(basis.cell.ly);
    h.add(basis.cell.n_electrons);
    h.add(basis.cell.rs);
    h.add(basis.nx);
    h.add(basis.ny);
    h.add(basis.xi);
    h.add(grid.mx);
    h.add(grid.my);
    h.add(opt.screen_tol);
    h.add(opt.pin.q);
    h.add(opt.pin.site.x);
    h.add(opt.pin.site.y);
    return h.h;
}

void save_tables(const std::filesystem::path& path, const IntegralTables& t,
                 std::uint64_t content_hash) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open cache for writing: " + path.string());
    std::fwrite(kMagic, 1, sizeof kMagic, f);
    put(f, kVersion);
    put(f, content_hash);
    put(f, static_cast<std::int32_t>(t.mx));
    put(f, static_cast<std::int32_t>(t.my));
    put(f, t.screen_tol);
    put_matrix(f, t.S);
    put_matrix(f, t.T);
    put(f, static_cast<std::uint8_t>(t.has_pin() ? 1 : 0));
    if (t.has_pin()) put_matrix(f, t.Vpin);
    save_store(f, t.eri);
    std::fclose(f);
}

std::optional<IntegralTables> load_tables(const std::filesystem::path& path,
                                          std::uint64_t content_hash) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) return std::nullopt;
    auto fail = [&]() {
        std::fclose(f);
        return std::nullopt;
    };
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0) return fail();
    std::uint8_t version = 0;
    std::uint64_t hash = 0;
    if (!take(f, version) || version != kVersion) return fail();
    if (!take(f, hash) || hash != content_hash) return fail();

    IntegralTables t;
    std::int32_t mx = 0, my = 0;
    std::uint8_t pinned = 0;
    if (!take(f, mx) || !take(f, my) || !take(f, t.screen_tol)) return fail();
    t.mx = mx;
    t.my = my;
    if (!take_matrix(f, t.S) || !take_matrix(f, t.T)) return fail();
    if (!take(f, pinned)) return fail();
    if (pinned && !take_matrix(f, t.Vpin)) return fail();
    if (!load_store(f, t.eri)) return fail();
    std::fclose(f);
    return t;
}

} // namespace wigner
