#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wigner/basis.hpp"
#include "wigner/rng.hpp"
#include "wigner/torus.hpp"

using namespace wigner;

namespace {
constexpr double kPi = 3.14159265358979323846;
} // namespace

TEST_CASE("build_basis: counts, exponent rule, centers") {
    auto sq = cell_from_rs(105.0, 16, 1.0);
    auto b = build_basis(sq, 20, 20, 0.8);
    CHECK(b.size() == 400);
    const double delta = sq.lx / 20.0;
    CHECK(b.alpha == doctest::Approx(0.8 / (delta * delta)).epsilon(1e-15));

    auto hex = cell_from_rs(105.0, 16, std::sqrt(3.0) / 2.0);
    auto bh = build_basis(hex, 22, 19, 0.8);
    CHECK(bh.size() == 418);
    // anisotropic grid: exponent keyed to the smaller spacing
    const double dmin = std::min(hex.lx / 22.0, hex.ly / 19.0);
    CHECK(bh.alpha == doctest::Approx(0.8 / (dmin * dmin)).epsilon(1e-15));

    auto b2 = build_basis(sq, 2, 2, 0.8);
    CHECK(b2.size() == 4);
    CHECK(b2.center(0).x == 0.0);
    CHECK(b2.center(0).y == 0.0);
    CHECK(b2.center(b2.index(1, 0)).x == doctest::Approx(sq.lx / 2.0));
    CHECK(b2.center(b2.index(0, 1)).y == doctest::Approx(sq.ly / 2.0));

    CHECK_THROWS_AS(build_basis(sq, 1, 4, 0.8), std::invalid_argument);
    CHECK_THROWS_AS(build_basis(sq, 4, 4, 0.0), std::invalid_argument);
}

TEST_CASE("basis_value: unit at center, gaussian falloff, bounded") {
    auto cell = cell_from_rs(10.0, 4, 1.0);
    auto b = build_basis(cell, 6, 6, 0.8);
    for (int i = 0; i < b.size(); ++i) CHECK(basis_value(b, i, b.center(i)) == 1.0);

    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        TorusPoint p = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        const int i = static_cast<int>(rng.next_u64() % b.size());
        const double v = basis_value(b, i, p);
        const double d = renormalized_distance(p, b.center(i), cell);
        CHECK(v == doctest::Approx(std::exp(-b.alpha * d * d)).epsilon(1e-14));
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("evaluate_basis: periodic images give identical columns") {
    auto cell = cell_from_rs(7.0, 2, 0.9);
    auto b = build_basis(cell, 5, 4, 0.8);
    TorusPoint p = make_point(1.234, 2.345, cell);
    TorusPoint img = make_point(p.x + cell.lx, p.y - 2.0 * cell.ly, cell);
    auto m = evaluate_basis(b, {p, img});
    REQUIRE(m.rows() == b.size());
    REQUIRE(m.cols() == 2);
    for (int i = 0; i < b.size(); ++i)
        CHECK(m(i, 0) == doctest::Approx(m(i, 1)).epsilon(1e-13));
}

TEST_CASE("translational covariance of amplitudes") {
    auto cell = cell_from_rs(9.0, 3, 1.1);
    auto b = build_basis(cell, 6, 7, 0.7);
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        TorusPoint p = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        const double tx = rng.uniform(-cell.lx, cell.lx);
        const double ty = rng.uniform(-cell.ly, cell.ly);
        const int i = static_cast<int>(rng.next_u64() % b.size());
        // moving both the point and the center by the same vector
        TorusPoint ps = make_point(p.x + tx, p.y + ty, cell);
        TorusPoint cs = make_point(b.center(i).x + tx, b.center(i).y + ty, cell);
        const double d = renormalized_distance(ps, cs, cell);
        CHECK(basis_value(b, i, p) == doctest::Approx(std::exp(-b.alpha * d * d)).epsilon(1e-12));
    }
}

TEST_CASE("neighbor overlap grows as xi shrinks") {
    auto cell = cell_from_rs(10.0, 4, 1.0);
    const int m = 64;
    double prev = -1.0;
    for (double xi : {1.6, 0.8, 0.4}) {
        auto b = build_basis(cell, 8, 8, xi);
        // crude grid overlap of two x-neighbors; enough for monotonicity
        auto gx = profiles_x(b, m);
        auto gy = profiles_y(b, m);
        double sx = 0.0, sy = 0.0;
        for (int p = 0; p < m; ++p) {
            sx += gx(0, p) * gx(1, p);
            sy += gy(0, p) * gy(0, p);
        }
        const double s01 = sx * sy; // up to the common area weight
        CHECK(s01 > prev);
        prev = s01;
    }
}

TEST_CASE("1D profiles factor the amplitude and differentiate correctly") {
    auto cell = cell_from_rs(6.0, 2, 0.8);
    auto b = build_basis(cell, 5, 6, 0.9);
    const int mx = 32, my = 40;
    auto gx = profiles_x(b, mx);
    auto gy = profiles_y(b, my);
    const double hx = cell.lx / mx, hy = cell.ly / my;

    for (int i : {0, 7, 13, b.size() - 1}) {
        for (int p = 0; p < mx; p += 5)
            for (int q = 0; q < my; q += 7) {
                const double v = basis_value(b, i, make_point(p * hx, q * hy, cell));
                CHECK(gx(b.xslot(i), p) * gy(b.yslot(i), q) == doctest::Approx(v).epsilon(1e-13));
            }
    }

    auto dgx = dprofiles_x(b, mx);
    const double h = 1e-6;
    for (int a = 0; a < b.nx; ++a)
        for (int p = 0; p < mx; p += 3) {
            const double x = p * hx, c = a * b.dx;
            auto g1d = [&](double xx) {
                const double s = cell.lx / kPi;
                const double t = std::sin(kPi * (xx - c) / cell.lx);
                return std::exp(-b.alpha * s * s * t * t);
            };
            const double fd = (g1d(x + h) - g1d(x - h)) / (2 * h);
            CHECK(dgx(a, p) == doctest::Approx(fd).epsilon(1e-6));
        }
}
