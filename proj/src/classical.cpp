#include "wigner/classical.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "wigner/errors.hpp"
#include "wigner/matching.hpp"

namespace wigner {

namespace {

constexpr double kPi = 3.14159265358979323846;

double max_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Energy and (optionally) gradient on raw flattened coordinates. The distance
// formula is periodic, so coordinates never need reduction here.
double eval_raw(const std::vector<double>& x, const TorusCell& cell, std::vector<double>* g) {
    const int n = static_cast<int>(x.size() / 2);
    if (g) std::fill(g->begin(), g->end(), 0.0);
    double u = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = x[2 * i] - x[2 * j];
            const double dy = x[2 * i + 1] - x[2 * j + 1];
            const double r = renormalized_distance_delta(dx, dy, cell);
            if (r == 0.0) throw CoincidentPoints("coincident particles in classical energy");
            u += 1.0 / r;
            if (g) {
                const double f = -1.0 / (r * r);
                const double gx = cell.lx / (2.0 * kPi * r) * std::sin(2.0 * kPi * dx / cell.lx);
                const double gy = cell.ly / (2.0 * kPi * r) * std::sin(2.0 * kPi * dy / cell.ly);
                (*g)[2 * i] += f * gx;
                (*g)[2 * i + 1] += f * gy;
                (*g)[2 * j] -= f * gx;
                (*g)[2 * j + 1] -= f * gy;
            }
        }
    }
    return u;
}

// Central-difference Hessian built from analytic gradients.
Eigen::MatrixXd fd_hessian(std::vector<double> x, const TorusCell& cell) {
    const int m = static_cast<int>(x.size());
    const double h = 1e-5 * cell.min_edge();
    Eigen::MatrixXd hess(m, m);
    std::vector<double> gp(m), gm(m);
    for (int k = 0; k < m; ++k) {
        const double xk = x[k];
        x[k] = xk + h;
        eval_raw(x, cell, &gp);
        x[k] = xk - h;
        eval_raw(x, cell, &gm);
        x[k] = xk;
        for (int r = 0; r < m; ++r) hess(r, k) = (gp[r] - gm[r]) / (2.0 * h);
    }
    return 0.5 * (hess + hess.transpose());
}

struct ProjModes {
    double min_eig = 0.0;
    double max_abs = 0.0;    // spectral scale, for a relative saddle threshold
    Eigen::VectorXd mode;    // lowest-eigenvalue direction, full 2n coords
};

// Eigen-analysis of the Hessian restricted to the complement of the two
// rigid-translation directions.
ProjModes projected_modes(const std::vector<double>& x, const TorusCell& cell) {
    const int m = static_cast<int>(x.size());
    const int n = m / 2;
    ProjModes out;
    if (m <= 2) return out;
    Eigen::MatrixXd hess = fd_hessian(x, cell);

    Eigen::MatrixXd t(m, 2);
    t.setZero();
    for (int i = 0; i < n; ++i) {
        t(2 * i, 0) = 1.0;
        t(2 * i + 1, 1) = 1.0;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd basis = q.rightCols(m - 2);
    Eigen::MatrixXd proj = basis.transpose() * hess * basis;
    proj = 0.5 * (proj + proj.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(proj);
    out.min_eig = es.eigenvalues()(0);
    out.max_abs = std::max(std::fabs(es.eigenvalues()(0)), std::fabs(es.eigenvalues()(m - 3)));
    out.mode = basis * es.eigenvectors().col(0);
    return out;
}

// Newton refinement with the two rigid-translation modes shifted out of the
// way. Quadratic convergence takes the gradient from ~1e-6 to machine level
// in a few steps, which CG alone cannot do along the soft phonon directions.
void newton_polish(std::vector<double>& x, double& u, std::vector<double>& g,
                   const TorusCell& cell, double grad_tol) {
    const int m = static_cast<int>(x.size());
    const int n = m / 2;
    Eigen::VectorXd t1 = Eigen::VectorXd::Zero(m), t2 = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
        t1(2 * i) = 1.0;
        t2(2 * i + 1) = 1.0;
    }
    t1.normalize();
    t2.normalize();

    for (int iter = 0; iter < 30; ++iter) {
        eval_raw(x, cell, &g);
        if (max_norm(g) <= std::min(grad_tol, 1e-12)) return;

        Eigen::MatrixXd hess = fd_hessian(x, cell);
        const double shift = std::max(1.0, hess.cwiseAbs().maxCoeff());
        hess += shift * (t1 * t1.transpose() + t2 * t2.transpose());

        Eigen::Map<const Eigen::VectorXd> gv(g.data(), m);
        Eigen::VectorXd step;
        double ridge = 0.0;
        for (int t = 0; t < 40; ++t) {
            Eigen::MatrixXd a = hess;
            if (ridge > 0.0) a += ridge * Eigen::MatrixXd::Identity(m, m);
            step = a.ldlt().solve(-gv);
            if (step.dot(gv) < 0.0 && step.allFinite()) break;
            ridge = (ridge == 0.0) ? 1e-10 * shift : ridge * 10.0;
        }

        bool accepted = false;
        double scale = 1.0;
        for (int bt = 0; bt < 30; ++bt) {
            std::vector<double> xt(x);
            for (int k = 0; k < m; ++k) xt[k] += scale * step(k);
            double ut;
            try {
                ut = eval_raw(xt, cell, nullptr);
            } catch (const CoincidentPoints&) {
                scale *= 0.5;
                continue;
            }
            // Near the minimum the energy decrease is below roundoff; accept
            // ties so the gradient (the actual target) can keep shrinking.
            if (ut <= u + 1e-14 * std::fabs(u)) {
                x = xt;
                u = ut;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
    }
    eval_raw(x, cell, &g);
}

Configuration gauge_fixed(const std::vector<double>& x, const TorusCell& cell) {
    Configuration out;
    const int n = static_cast<int>(x.size() / 2);
    out.positions.reserve(n);
    for (int i = 0; i < n; ++i)
        out.positions.push_back(make_point(x[2 * i] - x[0], x[2 * i + 1] - x[1], cell));
    out.energy = classical_energy(out.positions, cell);
    return out;
}

} // namespace

double classical_energy(const std::vector<TorusPoint>& pts, const TorusCell& cell) {
    std::vector<double> x(2 * pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        x[2 * i] = pts[i].x;
        x[2 * i + 1] = pts[i].y;
    }
    return eval_raw(x, cell, nullptr);
}

std::vector<std::array<double, 2>> classical_gradient(const std::vector<TorusPoint>& pts,
                                                      const TorusCell& cell) {
    std::vector<double> x(2 * pts.size()), g(2 * pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        x[2 * i] = pts[i].x;
        x[2 * i + 1] = pts[i].y;
    }
    eval_raw(x, cell, &g);
    std::vector<std::array<double, 2>> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = {g[2 * i], g[2 * i + 1]};
    return out;
}

Configuration minimize(const std::vector<TorusPoint>& start, const TorusCell& cell,
                       const MinimizeOptions& opt) {
    const int n = static_cast<int>(start.size());
    if (n < 1) throw std::invalid_argument("minimize: empty configuration");
    const int m = 2 * n;
    std::vector<double> x(m), g(m), gnew(m), d(m), xt(m);
    for (int i = 0; i < n; ++i) {
        x[2 * i] = start[i].x;
        x[2 * i + 1] = start[i].y;
    }

    double u = eval_raw(x, cell, &g);
    if (opt.trace) opt.trace->push_back({u, max_norm(g)});

    // CG hands off to the polish once the gradient is small; the Newton phase
    // owns the last stretch down to grad_tol.
    const double cg_tol = opt.polish ? std::max(opt.grad_tol, 1e-7) : opt.grad_tol;
    const double cap = 0.25 * cell.min_edge();

    // The polish converges onto any stationary point, including nearly flat
    // saddles (curvature ~1e-9 at large cells), so after it we check the
    // projected Hessian and restart descent from a kick along a negative mode.
    for (int attempt = 0; attempt < 4; ++attempt) {
        for (int k = 0; k < m; ++k) d[k] = -g[k];
        double alpha_prev = 0.0;
        int since_restart = 0;
        bool steepest = true;

        for (int it = 0; it < opt.max_iter; ++it) {
            if (max_norm(g) <= cg_tol) break;
            double gd = dot(g, d);
            if (gd >= 0.0 || since_restart >= 4 * n) {
                for (int k = 0; k < m; ++k) d[k] = -g[k];
                gd = -dot(g, g);
                since_restart = 0;
                steepest = true;
            }
            const double dmax = std::max(max_norm(d), 1e-300);
            double alpha = (alpha_prev > 0.0) ? std::min(2.0 * alpha_prev, cap / dmax)
                                              : 0.05 * cell.min_edge() / dmax;
            bool accepted = false;
            double ut = 0.0;
            for (int ls = 0; ls < 60; ++ls) {
                for (int k = 0; k < m; ++k) xt[k] = x[k] + alpha * d[k];
                try {
                    ut = eval_raw(xt, cell, &gnew);
                } catch (const CoincidentPoints&) {
                    alpha *= 0.5;
                    continue;
                }
                if (ut <= u + 1e-4 * alpha * gd) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (steepest) break; // no descent along -g: at numerical floor
                since_restart = 4 * n; // force a restart next round
                continue;
            }
            const double denom = dot(g, g);
            double beta = 0.0;
            if (denom > 0.0) {
                const double num = dot(gnew, gnew) - dot(gnew, g);
                beta = std::max(0.0, num / denom);
            }
            x.swap(xt);
            u = ut;
            g = gnew;
            for (int k = 0; k < m; ++k) d[k] = beta * d[k] - g[k];
            steepest = false;
            ++since_restart;
            alpha_prev = alpha;
            if (opt.trace) opt.trace->push_back({u, max_norm(g)});
        }

        if (!opt.polish || n <= 1) break;
        newton_polish(x, u, g, cell, opt.grad_tol);

        ProjModes pm = projected_modes(x, cell);
        if (pm.min_eig >= -std::max(1e-14, 1e-7 * pm.max_abs)) break;

        // Kick off the saddle along its negative mode; curvature only decides
        // at second order, so probe both signs and keep the lower side.
        const double kick = 1e-4 * cell.min_edge();
        std::vector<double> xp(m), xn(m);
        for (int k = 0; k < m; ++k) {
            xp[k] = x[k] + kick * pm.mode(k);
            xn[k] = x[k] - kick * pm.mode(k);
        }
        double up = std::numeric_limits<double>::infinity();
        double un = std::numeric_limits<double>::infinity();
        std::vector<double> gp(m), gn(m);
        try { up = eval_raw(xp, cell, &gp); } catch (const CoincidentPoints&) {}
        try { un = eval_raw(xn, cell, &gn); } catch (const CoincidentPoints&) {}
        if (!std::isfinite(up) && !std::isfinite(un)) break;
        if (up <= un) {
            x.swap(xp); u = up; g.swap(gp);
        } else {
            x.swap(xn); u = un; g.swap(gn);
        }
        if (opt.trace) opt.trace->push_back({u, max_norm(g)});
    }

    eval_raw(x, cell, &g);
    if (max_norm(g) > opt.grad_tol && n > 1) throw MinimizeFailure(gauge_fixed(x, cell));
    return gauge_fixed(x, cell);
}

std::vector<TorusPoint> random_configuration(const TorusCell& cell, Rng& rng) {
    std::vector<TorusPoint> pts;
    const double cutoff = 1e-3 * cell.min_edge();
    for (int i = 0; i < cell.n_electrons; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
            TorusPoint p = make_point(rng.uniform(0.0, cell.lx), rng.uniform(0.0, cell.ly), cell);
            placed = true;
            for (const auto& q : pts) {
                if (renormalized_distance(p, q, cell) < cutoff) {
                    placed = false;
                    break;
                }
            }
            if (placed) pts.push_back(p);
        }
        if (!placed) throw std::runtime_error("random_configuration: rejection sampling stuck");
    }
    return pts;
}

MultiStartResult multi_start(const TorusCell& cell, int n_starts, std::uint64_t seed,
                             const MinimizeOptions& opt) {
    if (n_starts < 1) throw std::invalid_argument("multi_start: n_starts must be positive");
    std::vector<std::optional<Configuration>> slots(n_starts);

#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < n_starts; ++s) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(s));
        auto start = random_configuration(cell, rng);
        try {
            slots[s] = minimize(start, cell, opt);
        } catch (const MinimizeFailure&) {
            // unconverged start: drop it, count below
        }
    }

    MultiStartResult res;
    res.n_starts = n_starts;
    std::vector<int> order;
    for (int s = 0; s < n_starts; ++s)
        if (slots[s]) order.push_back(s);
    res.n_converged = static_cast<int>(order.size());
    if (order.empty()) throw MinimizeFailure(Configuration{});
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (slots[a]->energy != slots[b]->energy) return slots[a]->energy < slots[b]->energy;
        return a < b;
    });

    const double rms_tol = 1e-5 * cell.min_edge();
    for (int s : order) {
        const Configuration& cand = *slots[s];
        bool dup = false;
        for (const auto& rep : res.minima) {
            const double esc = std::max({1.0, std::fabs(rep.energy), std::fabs(cand.energy)});
            if (std::fabs(cand.energy - rep.energy) > 1e-9 * esc) continue;
            if (matched_rms(cand.positions, rep.positions, cell) < rms_tol) {
                dup = true;
                break;
            }
        }
        if (!dup) res.minima.push_back(cand);
    }
    res.best = res.minima.front();
    return res;
}

double projected_hessian_min_eig(const std::vector<TorusPoint>& pts, const TorusCell& cell) {
    const int n = static_cast<int>(pts.size());
    if (n <= 1) return 0.0;
    std::vector<double> x(2 * n);
    for (int i = 0; i < n; ++i) {
        x[2 * i] = pts[i].x;
        x[2 * i + 1] = pts[i].y;
    }
    return projected_modes(x, cell).min_eig;
}

void write_positions_csv(const std::filesystem::path& path, const Configuration& conf,
                         const TorusCell& cell, const std::string& stamp) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    std::fprintf(f, "# %d %.17g %.17g %.17g\n", static_cast<int>(conf.positions.size()), cell.lx,
                 cell.ly, conf.energy);
    if (!stamp.empty()) std::fprintf(f, "# %s\n", stamp.c_str());
    for (size_t i = 0; i < conf.positions.size(); ++i)
        std::fprintf(f, "%zu,%.17g,%.17g\n", i, conf.positions[i].x, conf.positions[i].y);
    std::fclose(f);
}

std::pair<Configuration, TorusCell> read_positions_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw std::runtime_error("positions csv: missing header in " + path.string());

    int n = 0;
    double lx = 0, ly = 0, energy = 0;
    if (std::sscanf(line.c_str(), "# %d %lg %lg %lg", &n, &lx, &ly, &energy) != 4)
        throw std::runtime_error("positions csv: malformed header in " + path.string());
    if (n < 1 || lx <= 0 || ly <= 0)
        throw std::runtime_error("positions csv: bad header values in " + path.string());

    TorusCell cell;
    cell.lx = lx;
    cell.ly = ly;
    cell.n_electrons = n;
    cell.rs = std::sqrt(lx * ly / (n * kPi));

    Configuration conf;
    conf.energy = energy;
    conf.positions.reserve(n);
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        long idx = 0;
        double px = 0, py = 0;
        if (std::sscanf(line.c_str(), "%ld,%lg,%lg", &idx, &px, &py) != 3)
            throw std::runtime_error("positions csv: malformed row in " + path.string());
        conf.positions.push_back({px, py});
    }
    if (static_cast<int>(conf.positions.size()) != n)
        throw CountMismatch("positions csv: row count does not match header");
    return {conf, cell};
}

} // namespace wigner
