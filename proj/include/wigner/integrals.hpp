#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "wigner/basis.hpp"
#include "wigner/torus.hpp"

namespace wigner {

/// Uniform mx*my sampling of the cell (rectangle rule; spectrally accurate
/// for smooth periodic integrands). Points are (p*hx, q*hy), flat index
/// p*my + q.
struct QuadratureGrid {
    int mx = 0, my = 0;
    double hx = 0.0, hy = 0.0;
    double weight = 0.0; // hx*hy

    int npoints() const { return mx * my; }
};

/// Defaults (mx = my = 0): the smallest multiples of nx/ny that are at least
/// 4*max(nx,ny), rounded so both counts are even. Commensurate counts keep
/// the grid translation-homogeneous over basis sites. Explicit values must be
/// even; values below 2*nx (2*ny) throw GridTooCoarse.
QuadratureGrid make_quadrature(const TorusCell& cell, int nx, int ny, int mx = 0, int my = 0);

/// Exact integral of 1/d over the torus cell (d = renormalized distance to
/// the origin). Gauss-Legendre in polar-like coordinates; the 1/d singularity
/// cancels against the area element, so convergence is geometric.
double kernel_cell_integral(const TorusCell& cell);

/// The Coulomb kernel v(p,q) = 1/d sampled on the quadrature grid, plus its
/// real, even DFT coefficients. The integrable singularity is regularized by
/// adjusting the origin sample and its four axis neighbors so quadrature with
/// v exactly reproduces the cell integrals of 1/d weighted by 1 and by the
/// squared periodic coordinates; convolutions with smooth densities are then
/// accurate to O(h^5) instead of the O(h) a plain cell average gives.
struct KernelTable {
    int mx = 0, my = 0;
    std::vector<double> v;    // mx*my, row-major [p*my + q]
    std::vector<double> vhat; // (mx/2+1)*(my/2+1), [kx*(my/2+1) + ky]
    double origin_value = 0.0;
    double cell_integral = 0.0;

    double vhat_at(int kx, int ky) const; // any kx in [0,mx), ky in [0,my)
};

KernelTable coulomb_kernel_fourier(const TorusCell& cell, const QuadratureGrid& grid);

/// Overlap and kinetic matrices. T uses the integration-by-parts form
/// T_ij = 1/2 * quadrature of grad(g_i) . grad(g_j), exact on the torus.
/// When the grid is commensurate with the basis both matrices are exactly
/// symmetric and translation-homogeneous by construction. self_check doubles
/// the grid and throws GridTooCoarse if any S entry moves by more than 1e-9.
void overlap_and_kinetic(const BasisSet& basis, const QuadratureGrid& grid, Eigen::MatrixXd& S,
                         Eigen::MatrixXd& T, bool self_check = false);

/// Attraction to a pinning charge q at the given site:
/// (Vpin)_ij = -q * quadrature of g_i(r) g_j(r) / d(r, site).
/// A site on a grid node reuses the regularized kernel samples.
Eigen::MatrixXd pinning_potential(const BasisSet& basis, const QuadratureGrid& grid,
                                  const KernelTable& kernel, double q, TorusPoint site);

/// Screened store of two-electron integrals (ij|kl) over canonical index
/// quadruples (i<=j, k<=l, pair(ij)<=pair(kl)). Dense triangular array for
/// small bases, sorted key/value arrays above kDenseLimit functions.
class EriStore {
public:
    static constexpr int kDenseLimit = 64;

    EriStore() = default;

    double get(int i, int j, int k, int l) const;
    bool is_dense() const { return dense_; }
    std::size_t stored() const;
    int n_basis() const { return p_; }

    struct Entry {
        int i, j, k, l;
        double value;
    };

    /// Raw slot count for index-based traversal; dense slots include
    /// screened-out zeros, so entry() consumers skip value == 0.
    std::size_t n_slots() const { return dense_ ? dense_vals_.size() : keys_.size(); }

    /// Decode slot idx in [0, n_slots()). O(1).
    Entry entry(std::size_t idx) const {
        std::int64_t pij, pkl;
        double v;
        if (dense_) {
            const auto s = static_cast<std::int64_t>(idx);
            pkl = static_cast<std::int64_t>((std::sqrt(8.0 * static_cast<double>(s) + 1.0) - 1.0) / 2.0);
            while (pkl * (pkl + 1) / 2 > s) --pkl;
            while ((pkl + 1) * (pkl + 2) / 2 <= s) ++pkl;
            pij = s - pkl * (pkl + 1) / 2;
            v = dense_vals_[idx];
        } else {
            pij = static_cast<std::int64_t>(keys_[idx] / static_cast<std::uint64_t>(npair_));
            pkl = static_cast<std::int64_t>(keys_[idx] % static_cast<std::uint64_t>(npair_));
            v = vals_[idx];
        }
        const auto [i, j] = decode_[static_cast<std::size_t>(pij)];
        const auto [k, l] = decode_[static_cast<std::size_t>(pkl)];
        return {i, j, k, l, v};
    }

    /// Visit every stored canonical quadruple as f(i, j, k, l, value).
    template <class F>
    void for_each(F&& f) const {
        if (dense_) {
            const std::int64_t np = npair_;
            for (std::int64_t pkl = 0; pkl < np; ++pkl) {
                const std::int64_t base = pkl * (pkl + 1) / 2;
                for (std::int64_t pij = 0; pij <= pkl; ++pij) {
                    const double v = dense_vals_[base + pij];
                    if (v == 0.0) continue;
                    const auto [i, j] = decode_[pij];
                    const auto [k, l] = decode_[pkl];
                    f(i, j, k, l, v);
                }
            }
        } else {
            for (std::size_t t = 0; t < keys_.size(); ++t) {
                const std::int64_t pij = static_cast<std::int64_t>(keys_[t] / npair_);
                const std::int64_t pkl = static_cast<std::int64_t>(keys_[t] % npair_);
                const auto [i, j] = decode_[pij];
                const auto [k, l] = decode_[pkl];
                f(i, j, k, l, vals_[t]);
            }
        }
    }

private:
    friend EriStore eri_build(const BasisSet&, const QuadratureGrid&, const KernelTable&, double);
    friend EriStore eri_build_direct(const BasisSet&, const QuadratureGrid&, const KernelTable&,
                                     double);
    friend void save_store(std::FILE*, const EriStore&);
    friend bool load_store(std::FILE*, EriStore&);

    void init(int p);
    std::int64_t canonical_pairpair(int i, int j, int k, int l) const;

    bool dense_ = true;
    int p_ = 0;
    std::int64_t npair_ = 0;
    std::vector<double> dense_vals_;                 // dense: npair*(npair+1)/2
    std::vector<std::uint64_t> keys_;                // sparse: sorted pij*npair+pkl
    std::vector<double> vals_;
    std::vector<std::pair<int, int>> decode_;        // pair index -> (i,j)
};

/// FFT-factorized build: every gaussian product separates into 1D x/y
/// profiles, so each (ij|kl) is a short spectral dot product. Parallel over
/// bra pairs; output independent of scheduling. Schwarz bound
/// sqrt((ij|ij)(kl|kl)) < screen_tol drops a quadruple.
EriStore eri_build(const BasisSet& basis, const QuadratureGrid& grid, const KernelTable& kernel,
                   double screen_tol = 1e-10);

/// Reference path: explicit double quadrature sum, no FFT, serial. Used by
/// tests and the benchmark as the independent oracle for eri_build.
EriStore eri_build_direct(const BasisSet& basis, const QuadratureGrid& grid,
                          const KernelTable& kernel, double screen_tol = 1e-10);

/// One integral by the explicit double sum (serial reference).
double eri_direct_value(const BasisSet& basis, const QuadratureGrid& grid,
                        const KernelTable& kernel, int i, int j, int k, int l);

struct PinSpec {
    double q = 0.0; // 0 disables pinning
    TorusPoint site{0.0, 0.0};
};

struct TableOptions {
    double screen_tol = 1e-10;
    bool self_check = false;
    PinSpec pin;
};

struct IntegralTables {
    Eigen::MatrixXd S, T;
    Eigen::MatrixXd Vpin; // 0x0 when pinning is off
    EriStore eri;
    int mx = 0, my = 0;
    double screen_tol = 0.0;

    bool has_pin() const { return Vpin.size() > 0; }
};

IntegralTables build_tables(const BasisSet& basis, const QuadratureGrid& grid,
                            const TableOptions& opt = {});

/// Content hash identifying {cell, basis, grid, screening, pinning} for the
/// integral cache (FNV-1a over the raw parameter bytes).
std::uint64_t tables_content_hash(const BasisSet& basis, const QuadratureGrid& grid,
                                  const TableOptions& opt);

/// Binary cache: 8-byte magic "W2DTBL\r\n", one version byte, the content
/// hash, then the tables (little-endian, layout documented in the README).
void save_tables(const std::filesystem::path& path, const IntegralTables& tables,
                 std::uint64_t content_hash);

/// Returns the cached tables only if magic, version, and hash all match.
std::optional<IntegralTables> load_tables(const std::filesystem::path& path,
                                          std::uint64_t content_hash);

} // namespace wigner
