#include "wigner/density.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>

#include "wigner/errors.hpp"
#include "wigner/matching.hpp"

namespace wigner {

DensityGrid density_from_state(const ScfState& state, const BasisSet& basis,
                               const QuadratureGrid& grid) {
    const int n = static_cast<int>(state.coeffs.cols());
    if (n < 1 || state.coeffs.rows() != basis.size())
        throw std::invalid_argument("state coefficients do not match the basis");
    const Eigen::MatrixXd px = profiles_x(basis, grid.mx); // nx x mx
    const Eigen::MatrixXd py = profiles_y(basis, grid.my); // ny x my

    DensityGrid out;
    out.cell = basis.cell;
    out.mx = grid.mx;
    out.my = grid.my;
    out.values = Eigen::MatrixXd::Zero(grid.mx, grid.my);
    for (int k = 0; k < n; ++k) {
        // coefficient index i = a*ny + b -> column-major view with ny rows
        Eigen::Map<const Eigen::MatrixXd> ck(state.coeffs.col(k).data(), basis.ny, basis.nx);
        const Eigen::MatrixXd psi = px.transpose() * ck.transpose() * py; // mx x my
        out.values += psi.cwiseProduct(psi);
    }
    out.normalization = out.values.sum() * grid.weight;
    if (std::fabs(out.normalization - n) > 1e-4)
        throw NormalizationDrift("density integrates to " + std::to_string(out.normalization) +
                                 " for " + std::to_string(n) + " electrons");
    return out;
}

namespace {

// least-squares quadratic through the 3x3 log-density patch; returns the
// sub-cell offset (clamped) and the refined log-amplitude
void refine_quadratic(const double t[3][3], double& du, double& dv, double& tpeak) {
    double s = 0, su = 0, sv = 0, suu = 0, svv = 0, suv = 0;
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
            const double f = t[a + 1][b + 1];
            s += f;
            su += a * f;
            sv += b * f;
            suu += a * a * f;
            svv += b * b * f;
            suv += a * b * f;
        }
    const double gu = su / 6.0, gv = sv / 6.0, huv = suv / 4.0;
    Eigen::Matrix3d gram;
    gram << 9, 6, 6, 6, 6, 4, 6, 4, 6;
    const Eigen::Vector3d mom = gram.fullPivLu().solve(Eigen::Vector3d(s, suu, svv));
    const double c = mom(0), huu = 2.0 * mom(1), hvv = 2.0 * mom(2);

    du = dv = 0.0;
    const double det = huu * hvv - huv * huv;
    if (det > 0.0 && huu < 0.0) { // negative definite: genuine maximum
        du = -(hvv * gu - huv * gv) / det;
        dv = -(huu * gv - huv * gu) / det;
        du = std::clamp(du, -0.6, 0.6);
        dv = std::clamp(dv, -0.6, 0.6);
    }
    tpeak = c + gu * du + gv * dv +
            0.5 * (huu * du * du + 2.0 * huv * du * dv + hvv * dv * dv);
}

} // namespace

std::vector<Peak> find_peaks(const DensityGrid& density, int expected, double rel_threshold) {
    if (expected < 1) throw std::invalid_argument("expected peak count must be >= 1");
    const int mx = density.mx, my = density.my;
    const auto& v = density.values;
    const double cutoff = rel_threshold * v.maxCoeff();
    const double hx = density.cell.lx / mx, hy = density.cell.ly / my;

    std::vector<Peak> peaks;
    for (int p = 0; p < mx; ++p)
        for (int q = 0; q < my; ++q) {
            const double c = v(p, q);
            if (c <= cutoff) continue;
            bool strict_max = true;
            for (int a = -1; a <= 1 && strict_max; ++a)
                for (int b = -1; b <= 1; ++b) {
                    if (a == 0 && b == 0) continue;
                    if (v((p + a + mx) % mx, (q + b + my) % my) >= c) {
                        strict_max = false;
                        break;
                    }
                }
            if (!strict_max) continue;

            double t[3][3];
            const double floor_val = c * 1e-12;
            for (int a = -1; a <= 1; ++a)
                for (int b = -1; b <= 1; ++b)
                    t[a + 1][b + 1] =
                        std::log(std::max(v((p + a + mx) % mx, (q + b + my) % my), floor_val));
            double du, dv, tpk;
            refine_quadratic(t, du, dv, tpk);
            peaks.push_back(
                {make_point((p + du) * hx, (q + dv) * hy, density.cell), std::exp(tpk)});
        }

    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        if (a.pos.x != b.pos.x) return a.pos.x < b.pos.x;
        return a.pos.y < b.pos.y;
    });
    if (static_cast<int>(peaks.size()) != expected)
        throw PeakCountMismatch(static_cast<int>(peaks.size()), expected);
    return peaks;
}

double match_to_classical(const std::vector<Peak>& peaks, const Configuration& oracle,
                          const TorusCell& cell) {
    std::vector<TorusPoint> pts;
    pts.reserve(peaks.size());
    for (const auto& p : peaks) pts.push_back(p.pos);
    return matched_rms(pts, oracle.positions, cell);
}

HexOrder hexagonal_order(const std::vector<TorusPoint>& sites, const TorusCell& cell) {
    const int n = static_cast<int>(sites.size());
    if (n < 7)
        throw TooFewPeaks("hexagonal order needs at least 7 sites, got " + std::to_string(n));

    HexOrder out;
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(n) * 6);
    for (int i = 0; i < n; ++i) {
        struct Bond {
            double dist, dx, dy;
        };
        std::vector<Bond> bonds;
        bonds.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto d = min_image(sites[i], sites[j], cell);
            bonds.push_back({std::hypot(d[0], d[1]), d[0], d[1]});
        }
        // total order so tied distances (square lattice) pick the same bonds
        // regardless of input ordering
        std::partial_sort(bonds.begin(), bonds.begin() + 6, bonds.end(),
                          [](const Bond& a, const Bond& b) {
                              if (a.dist != b.dist) return a.dist < b.dist;
                              if (a.dx != b.dx) return a.dx < b.dx;
                              return a.dy < b.dy;
                          });
        std::complex<double> acc(0.0, 0.0);
        for (int k = 0; k < 6; ++k) {
            const double theta = std::atan2(bonds[k].dy, bonds[k].dx);
            acc += std::polar(1.0, 6.0 * theta);
            pooled.push_back(bonds[k].dist);
        }
        out.psi6 += std::abs(acc) / 6.0;
    }
    out.psi6 /= n;

    const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / pooled.size();
    double var = 0.0;
    for (double d : pooled) var += (d - mean) * (d - mean);
    out.neighbor_distance_cv = std::sqrt(var / pooled.size()) / mean;
    return out;
}

HexOrder hexagonal_order(const std::vector<Peak>& peaks, const TorusCell& cell) {
    std::vector<TorusPoint> pts;
    pts.reserve(peaks.size());
    for (const auto& p : peaks) pts.push_back(p.pos);
    return hexagonal_order(pts, cell);
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

int inequivalence_classes(const DensityGrid& density, const std::vector<Peak>& peaks,
                          double tol) {
    const int n = static_cast<int>(peaks.size());
    if (n == 0) return 0;
    if (n == 1) return 1;

    // patch radius: half the minimum peak separation (min-image Euclidean)
    double rmin = std::hypot(density.cell.lx, density.cell.ly);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto d = min_image(peaks[i].pos, peaks[j].pos, density.cell);
            rmin = std::min(rmin, std::hypot(d[0], d[1]));
        }
    const double radius = 0.5 * rmin;

    const double hx = density.cell.lx / density.mx, hy = density.cell.ly / density.my;
    Eigen::MatrixXd feat(n, 3); // height, larger/smaller second-moment eigenvalue
    for (int i = 0; i < n; ++i) {
        double sw = 0, swx = 0, swy = 0, swxx = 0, swyy = 0, swxy = 0;
        for (int p = 0; p < density.mx; ++p)
            for (int q = 0; q < density.my; ++q) {
                const auto d =
                    min_image(peaks[i].pos, make_point(p * hx, q * hy, density.cell),
                              density.cell);
                const double dx = d[0], dy = d[1];
                if (dx * dx + dy * dy > radius * radius) continue;
                const double w = std::max(density.values(p, q), 0.0);
                sw += w;
                swx += w * dx;
                swy += w * dy;
                swxx += w * dx * dx;
                swyy += w * dy * dy;
                swxy += w * dx * dy;
            }
        const double cx = swx / sw, cy = swy / sw;
        const double mxx = swxx / sw - cx * cx;
        const double myy = swyy / sw - cy * cy;
        const double mxy = swxy / sw - cx * cy;
        const double tr = mxx + myy;
        const double disc = std::sqrt(std::max((mxx - myy) * (mxx - myy) + 4 * mxy * mxy, 0.0));
        feat(i, 0) = peaks[i].height;
        feat(i, 1) = 0.5 * (tr + disc);
        feat(i, 2) = 0.5 * (tr - disc);
    }

    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            bool same = true;
            for (int c = 0; c < 3 && same; ++c) {
                const double scale = std::max(std::fabs(feat(i, c)), std::fabs(feat(j, c)));
                if (std::fabs(feat(i, c) - feat(j, c)) > tol * scale) same = false;
            }
            if (same) uf.unite(i, j);
        }
    int classes = 0;
    for (int i = 0; i < n; ++i)
        if (uf.find(i) == i) ++classes;
    return classes;
}

LatticeReport build_lattice_report(const DensityGrid& density, int expected,
                                   const std::optional<Configuration>& oracle,
                                   double class_tol) {
    LatticeReport rep;
    rep.peaks = find_peaks(density, expected);
    if (oracle) rep.matched_rms = match_to_classical(rep.peaks, *oracle, density.cell);
    if (expected >= 7) {
        const HexOrder hex = hexagonal_order(rep.peaks, density.cell);
        rep.psi6 = hex.psi6;
        rep.neighbor_distance_cv = hex.neighbor_distance_cv;
    }
    rep.inequivalence_classes = inequivalence_classes(density, rep.peaks, class_tol);
    return rep;
}

void write_density(const std::filesystem::path& path, const DensityGrid& density,
                   const std::string& stamp) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    std::fprintf(f, "# wigner2d-density-v1\n");
    std::fprintf(f, "# %d %d %.17g %.17g %d\n", density.mx, density.my, density.cell.lx,
                 density.cell.ly, density.cell.n_electrons);
    if (!stamp.empty()) std::fprintf(f, "# %s\n", stamp.c_str());
    for (int p = 0; p < density.mx; ++p) {
        for (int q = 0; q < density.my; ++q)
            std::fprintf(f, "%.17g%c", density.values(p, q), q + 1 == density.my ? '\n' : ' ');
    }
    std::fclose(f);
}

DensityGrid read_density(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "r");
    if (!f) throw std::runtime_error("cannot open " + path.string());
    char magic[64];
    DensityGrid out;
    int n_electrons = 0;
    if (!std::fgets(magic, sizeof magic, f) ||
        std::string(magic) != "# wigner2d-density-v1\n" ||
        std::fscanf(f, "# %d %d %lg %lg %d", &out.mx, &out.my, &out.cell.lx, &out.cell.ly,
                    &n_electrons) != 5 ||
        out.mx < 1 || out.my < 1 || n_electrons < 1) {
        std::fclose(f);
        throw std::runtime_error("not a density file: " + path.string());
    }
    out.cell.n_electrons = n_electrons;
    out.cell.rs = std::sqrt(out.cell.lx * out.cell.ly / (n_electrons * 3.14159265358979323846));

    // skip the rest of the header line plus any further comment lines (stamps)
    int ch;
    while ((ch = std::fgetc(f)) != EOF && ch != '\n') {}
    while ((ch = std::fgetc(f)) == '#')
        while ((ch = std::fgetc(f)) != EOF && ch != '\n') {}
    if (ch != EOF) std::ungetc(ch, f);

    out.values.resize(out.mx, out.my);
    for (int p = 0; p < out.mx; ++p)
        for (int q = 0; q < out.my; ++q)
            if (std::fscanf(f, "%lg", &out.values(p, q)) != 1) {
                std::fclose(f);
                throw std::runtime_error("truncated density file: " + path.string());
            }
    std::fclose(f);
    out.normalization =
        out.values.sum() * (out.cell.lx / out.mx) * (out.cell.ly / out.my);
    return out;
}

} // namespace wigner
