#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wigner/errors.hpp"
#include "wigner/rng.hpp"
#include "wigner/torus.hpp"

using namespace wigner;

namespace {
constexpr double kPi = 3.14159265358979323846;

TorusCell square_cell(double l) {
    TorusCell c;
    c.lx = c.ly = l;
    c.n_electrons = 1;
    c.rs = std::sqrt(l * l / kPi);
    return c;
}
} // namespace

TEST_CASE("wrap_coord maps into [0, L)") {
    CHECK(wrap_coord(0.0, 10.0) == 0.0);
    CHECK(wrap_coord(10.0, 10.0) == 0.0);
    CHECK(wrap_coord(23.5, 10.0) == doctest::Approx(3.5));
    CHECK(wrap_coord(-0.3, 10.0) == doctest::Approx(9.7));
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-1e4, 1e4);
        const double w = wrap_coord(x, 10.0);
        CHECK(w >= 0.0);
        CHECK(w < 10.0);
    }
}

TEST_CASE("min_image picks the nearest representative") {
    auto cell = square_cell(10.0);
    // returns b - a with components folded into (-L/2, L/2]
    auto d = min_image({0.1, 0.0}, {9.9, 0.0}, cell);
    CHECK(d[0] == doctest::Approx(-0.2));
    CHECK(d[1] == doctest::Approx(0.0));
    d = min_image({1.0, 9.5}, {1.0, 0.5}, cell);
    CHECK(d[1] == doctest::Approx(1.0));
}

TEST_CASE("renormalized distance: closed-form points") {
    auto cell = square_cell(10.0);
    TorusPoint a{0.0, 0.0};
    CHECK(renormalized_distance(a, a, cell) == 0.0);
    CHECK(renormalized_distance(a, {5.0, 0.0}, cell) == doctest::Approx(10.0 / kPi).epsilon(1e-14));
    CHECK(renormalized_distance(a, {5.0, 5.0}, cell) ==
          doctest::Approx(10.0 * std::sqrt(2.0) / kPi).epsilon(1e-14));
    CHECK(renormalized_distance(a, {2.5, 0.0}, cell) ==
          doctest::Approx(10.0 * std::sin(kPi / 4.0) / kPi).epsilon(1e-14));
    // small separations look Euclidean
    CHECK(renormalized_distance(a, {1e-4, 2e-4}, cell) ==
          doctest::Approx(std::sqrt(5.0) * 1e-4).epsilon(1e-7));
}

TEST_CASE("renormalized distance: symmetry, periodicity, bound") {
    TorusCell cell;
    cell.lx = 12.0;
    cell.ly = 7.0;
    cell.n_electrons = 1;
    cell.rs = std::sqrt(cell.lx * cell.ly / kPi);
    const double bound = std::sqrt(cell.lx * cell.lx + cell.ly * cell.ly) / kPi;
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        TorusPoint a = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        TorusPoint b = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        const double r = renormalized_distance(a, b, cell);
        // exchange symmetry is exact in floating point (|dx| is used inside)
        CHECK(renormalized_distance(b, a, cell) == r);
        CHECK(r <= bound * (1.0 + 1e-15));
        // shifting one argument by a lattice vector leaves r unchanged
        TorusPoint as = make_point(a.x + cell.lx, a.y - cell.ly, cell);
        CHECK(renormalized_distance(as, b, cell) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("distance gradient matches finite differences") {
    TorusCell cell;
    cell.lx = 9.0;
    cell.ly = 13.0;
    cell.n_electrons = 1;
    cell.rs = std::sqrt(cell.lx * cell.ly / kPi);
    Rng rng(123);
    const double h = 1e-6;
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        TorusPoint a = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        TorusPoint b = make_point(rng.uniform(0, cell.lx), rng.uniform(0, cell.ly), cell);
        if (renormalized_distance(a, b, cell) < 0.1) continue;
        auto g = distance_gradient(a, b, cell);
        const double fx = (renormalized_distance({a.x + h, a.y}, b, cell) -
                           renormalized_distance({a.x - h, a.y}, b, cell)) /
                          (2 * h);
        const double fy = (renormalized_distance({a.x, a.y + h}, b, cell) -
                           renormalized_distance({a.x, a.y - h}, b, cell)) /
                          (2 * h);
        CHECK(std::fabs(g[0] - fx) <= 1e-6 * (1.0 + std::fabs(fx)));
        CHECK(std::fabs(g[1] - fy) <= 1e-6 * (1.0 + std::fabs(fy)));
        // swapping arguments flips the sign
        auto gs = distance_gradient(b, a, cell);
        CHECK(g[0] == doctest::Approx(-gs[0]).epsilon(1e-13));
        CHECK(g[1] == doctest::Approx(-gs[1]).epsilon(1e-13));
        ++checked;
    }
    CHECK(checked > 400);
}

TEST_CASE("distance gradient: stationary at the antipode, throws at zero") {
    auto cell = square_cell(10.0);
    TorusPoint a{1.0, 2.0};
    TorusPoint antipode = make_point(a.x + 5.0, a.y, cell);
    auto g = distance_gradient(a, antipode, cell);
    CHECK(std::fabs(g[0]) < 1e-12);
    CHECK_THROWS_AS(distance_gradient(a, a, cell), CoincidentPoints);
}

TEST_CASE("cell_from_rs fixes area and aspect") {
    auto cell = cell_from_rs(105.0, 16, std::sqrt(3.0) / 2.0);
    CHECK(cell.lx * cell.ly == doctest::Approx(16.0 * kPi * 105.0 * 105.0).epsilon(1e-13));
    CHECK(cell.ly / cell.lx == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-13));
    CHECK(cell.n_electrons == 16);
    CHECK(cell.rs == 105.0);
    CHECK(cell.valid());

    auto sq = cell_from_rs(105.0, 1, 1.0);
    CHECK(sq.lx == doctest::Approx(105.0 * std::sqrt(kPi)).epsilon(1e-13));
    CHECK(sq.lx == sq.ly);
    CHECK(sq.is_square());

    CHECK_THROWS_AS(cell_from_rs(-1.0, 4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cell_from_rs(105.0, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cell_from_rs(105.0, 4, 0.0), std::invalid_argument);
}

TEST_CASE("rng: deterministic, substreams independent") {
    Rng a(99), b(99);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng s0 = Rng::substream(5, 0), s1 = Rng::substream(5, 1);
    CHECK(s0.next_u64() != s1.next_u64());
    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform(2.0, 3.0);
        CHECK(x >= 2.0);
        CHECK(x < 3.0);
    }
}
