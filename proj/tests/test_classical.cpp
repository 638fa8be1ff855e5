#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wigner/classical.hpp"
#include "wigner/errors.hpp"
#include "wigner/matching.hpp"
#include "wigner/rng.hpp"
#include "wigner/torus.hpp"

using namespace wigner;

namespace {
constexpr double kPi = 3.14159265358979323846;
} // namespace

TEST_CASE("classical energy: pair value and translation invariance") {
    auto cell = cell_from_rs(10.0, 2, 1.0);
    std::vector<TorusPoint> pts = {{1.0, 2.0}, {4.0, 7.0}};
    const double r = renormalized_distance(pts[0], pts[1], cell);
    CHECK(classical_energy(pts, cell) == doctest::Approx(1.0 / r).epsilon(1e-15));

    std::vector<TorusPoint> shifted;
    for (auto& p : pts) shifted.push_back(make_point(p.x + 3.3, p.y - 1.7, cell));
    CHECK(classical_energy(shifted, cell) ==
          doctest::Approx(classical_energy(pts, cell)).epsilon(1e-12));

    std::vector<TorusPoint> dup = {{1.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(classical_energy(dup, cell), CoincidentPoints);
}

TEST_CASE("classical gradient matches finite differences and sums to zero") {
    auto cell = cell_from_rs(8.0, 5, 0.8);
    Rng rng(11);
    auto pts = random_configuration(cell, rng);
    auto grad = classical_gradient(pts, cell);

    double sx = 0, sy = 0, scale = 0;
    for (auto& g : grad) {
        sx += g[0];
        sy += g[1];
        scale += std::fabs(g[0]) + std::fabs(g[1]);
    }
    CHECK(std::fabs(sx) <= 1e-13 * scale);
    CHECK(std::fabs(sy) <= 1e-13 * scale);

    const double h = 1e-6 * cell.min_edge();
    for (size_t i = 0; i < pts.size(); ++i) {
        auto pp = pts, pm = pts;
        pp[i].x += h;
        pm[i].x -= h;
        const double fx = (classical_energy(pp, cell) - classical_energy(pm, cell)) / (2 * h);
        CHECK(grad[i][0] == doctest::Approx(fx).epsilon(1e-5));
        pp = pts;
        pm = pts;
        pp[i].y += h;
        pm[i].y -= h;
        const double fy = (classical_energy(pp, cell) - classical_energy(pm, cell)) / (2 * h);
        CHECK(grad[i][1] == doctest::Approx(fy).epsilon(1e-5));
    }
}

TEST_CASE("two particles relax to the antipodal arrangement") {
    auto cell = cell_from_rs(12.0, 2, 1.0);
    Rng rng(5);
    MinimizeOptions opt;
    std::vector<std::pair<double, double>> trace;
    opt.trace = &trace;
    auto conf = minimize(random_configuration(cell, rng), cell, opt);

    const double rmax = std::sqrt(cell.lx * cell.lx + cell.ly * cell.ly) / kPi;
    CHECK(conf.energy == doctest::Approx(1.0 / rmax).epsilon(1e-10));
    CHECK(renormalized_distance(conf.positions[0], conf.positions[1], cell) ==
          doctest::Approx(rmax).epsilon(1e-10));
    // gauge: first particle at the origin
    CHECK(conf.positions[0].x == 0.0);
    CHECK(conf.positions[0].y == 0.0);

    // accepted CG steps never increase the energy
    for (size_t k = 1; k < trace.size(); ++k) CHECK(trace[k].first <= trace[k - 1].first);

    auto g = classical_gradient(conf.positions, cell);
    for (auto& gi : g) {
        CHECK(std::fabs(gi[0]) <= 1e-10);
        CHECK(std::fabs(gi[1]) <= 1e-10);
    }
}

TEST_CASE("minimum of four particles is a strict minimum modulo translations") {
    auto cell = cell_from_rs(9.0, 4, 1.0);
    Rng rng(21);
    auto conf = minimize(random_configuration(cell, rng), cell);
    CHECK(projected_hessian_min_eig(conf.positions, cell) > 0.0);
}

TEST_CASE("random_configuration respects the coincidence cutoff") {
    auto cell = cell_from_rs(3.0, 12, 1.0);
    Rng rng(17);
    auto pts = random_configuration(cell, rng);
    REQUIRE(pts.size() == 12);
    const double cutoff = 1e-3 * cell.min_edge();
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            CHECK(renormalized_distance(pts[i], pts[j], cell) >= cutoff);
}

TEST_CASE("multi_start: deterministic, deduplicates symmetry copies") {
    auto cell = cell_from_rs(10.0, 2, 1.0);
    auto r1 = multi_start(cell, 6, 77);
    auto r2 = multi_start(cell, 6, 77);
    CHECK(r1.best.energy == r2.best.energy); // bit-identical rerun
    CHECK(r1.n_converged == 6);
    // every start lands on the unique antipodal minimum
    CHECK(r1.minima.size() == 1);
    for (size_t k = 1; k < r1.minima.size(); ++k)
        CHECK(r1.minima[k - 1].energy <= r1.minima[k].energy);

    auto r3 = multi_start(cell, 6, 78);
    CHECK(r3.best.energy == doctest::Approx(r1.best.energy).epsilon(1e-10));
}

TEST_CASE("matched_rms: invariances and discrimination") {
    auto cell = cell_from_rs(7.0, 5, 1.0);
    Rng rng(31);
    auto a = random_configuration(cell, rng);

    CHECK(matched_rms(a, a, cell) <= 1e-12);

    // rigid translation + relabeling + reflection is a symmetry copy
    std::vector<TorusPoint> b;
    for (auto& p : a) b.push_back(make_point(-(p.x + 1.23), p.y - 4.56, cell));
    std::swap(b[0], b[3]);
    CHECK(matched_rms(b, a, cell) <= 1e-9 * cell.min_edge());

    // square cell: quarter-turn is a symmetry too
    std::vector<TorusPoint> c;
    for (auto& p : a) c.push_back(make_point(p.y, -p.x, cell));
    CHECK(matched_rms(c, a, cell) <= 1e-9 * cell.min_edge());

    // an unrelated arrangement is far away
    auto d = random_configuration(cell, rng);
    CHECK(matched_rms(d, a, cell) > 1e-3 * cell.min_edge());

    std::vector<TorusPoint> short_set(a.begin(), a.end() - 1);
    CHECK_THROWS_AS(matched_rms(short_set, a, cell), CountMismatch);
}

TEST_CASE("hungarian_assign solves small instances exactly") {
    // cost chosen so greedy row-wise assignment is suboptimal
    std::vector<double> cost = {4, 1, 3, 2, 0, 5, 3, 2, 2};
    auto a = hungarian_assign(cost, 3);
    double total = 0;
    for (int i = 0; i < 3; ++i) total += cost[i * 3 + a[i]];
    CHECK(total == doctest::Approx(5.0)); // (0,1),(1,0),(2,2)

    // identity is optimal for a diagonal-dominant cost
    std::vector<double> cost2 = {0, 9, 9, 9, 0, 9, 9, 9, 0};
    auto b = hungarian_assign(cost2, 3);
    for (int i = 0; i < 3; ++i) CHECK(b[i] == i);
}

TEST_CASE("positions csv round-trips bit-exactly") {
    auto cell = cell_from_rs(6.0, 4, std::sqrt(3.0) / 2.0);
    Rng rng(13);
    auto conf = minimize(random_configuration(cell, rng), cell);

    auto path = std::filesystem::temp_directory_path() / "wigner2d_pos_test.csv";
    write_positions_csv(path, conf, cell);
    auto [back, cell2] = read_positions_csv(path);
    std::filesystem::remove(path);

    REQUIRE(back.positions.size() == conf.positions.size());
    CHECK(back.energy == conf.energy);
    CHECK(cell2.lx == cell.lx);
    CHECK(cell2.ly == cell.ly);
    CHECK(cell2.n_electrons == cell.n_electrons);
    for (size_t i = 0; i < conf.positions.size(); ++i) {
        CHECK(back.positions[i].x == conf.positions[i].x);
        CHECK(back.positions[i].y == conf.positions[i].y);
    }
}
