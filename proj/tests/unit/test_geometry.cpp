#include <catch_amalgamated.hpp>

#include <random>

#include <cornerflow/geometry.hpp>

using namespace cornerflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

cplx random_wedge_point(std::mt19937_64& rng, double nu) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = std::pow(10.0, -3.0 + 5.0 * u(rng));
    return std::polar(r, nu * pi * u(rng));
}

}  // namespace

TEST_CASE("sector_power uses the [0, 2pi) branch") {
    CHECK_THAT(std::abs(sector_power({-1.0, 0.0}, 0.5) - cplx(0.0, 1.0)), WithinAbs(0.0, 1e-15));
    // just below the positive axis the argument is near 2pi, not near 0
    cplx z = std::polar(1.0, -1e-3);
    CHECK(std::arg(sector_power(z, 0.5)) > 3.0);
    CHECK(sector_power({0.0, 0.0}, 0.7) == cplx{});
    CHECK_THROWS_AS(sector_power({0.0, 0.0}, -1.0), DomainError);
}

TEST_CASE("wedge parameters are validated") {
    CHECK_THROWS_AS(WedgeParams(0.5), DomainError);
    CHECK_THROWS_AS(WedgeParams(1.0), DomainError);
    CHECK_THROWS_AS(WedgeParams(0.75, 1.5), DomainError);
    CHECK_THROWS_AS(WedgeParams(0.75, -0.1), DomainError);
    CHECK_NOTHROW(WedgeParams::extended(1.0));
    CHECK_THROWS_AS(WedgeParams(0.75).c_eps(), DomainError);
    CHECK_THAT(WedgeParams(0.75, 0.5).c_eps().imag(), WithinAbs(2.5, 1e-15));
}

TEST_CASE("exact map sends the wedge onto the upper half plane") {
    std::mt19937_64 rng(7);
    for (double nu : {0.55, 0.75, 0.9}) {
        WedgeParams p(nu);
        for (int i = 0; i < 500; ++i) {
            cplx z = random_wedge_point(rng, nu);
            cplx w = map_to_halfplane(z, p);
            CHECK(w.imag() >= 0.0);
            CHECK_THAT(std::abs(w), WithinRel(std::pow(std::abs(z), 1 / nu), 1e-12));
            CHECK_THAT(std::arg(w), WithinAbs(std::arg(z) / nu, 1e-12));
        }
        // the two walls land on the two halves of the real axis
        CHECK_THAT(map_to_halfplane(std::polar(2.0, nu * pi), p).real(), WithinRel(-std::pow(2.0, 1 / nu), 1e-12));
        CHECK_THAT(map_to_halfplane(std::polar(2.0, nu * pi), p).imag(), WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("points outside the closed wedge are rejected") {
    WedgeParams p(0.75);
    CHECK_THROWS_AS(map_to_halfplane(std::polar(1.0, 0.8 * pi), p), DomainError);
    CHECK_THROWS_AS(map_to_halfplane({1.0, -0.1}, p), DomainError);
}

TEST_CASE("round trip through the smoothed maps") {
    std::mt19937_64 rng(11);
    for (double nu : {0.55, 0.625, 0.75, 0.9})
        for (double eps : {0.0, 0.1, 0.5, 1.0}) {
            WedgeParams p(nu, eps);
            double worst = 0.0;
            for (int i = 0; i < 1000; ++i) {
                cplx z = random_wedge_point(rng, nu);
                worst = std::max(worst, std::abs(map_from_halfplane(map_to_halfplane(z, p), p) - z) / (1 + std::abs(z)));
            }
            INFO("nu=" << nu << " eps=" << eps);
            CHECK(worst <= 1e-10);
        }
}

TEST_CASE("smoothed map: both algebraic forms agree") {
    std::mt19937_64 rng(3);
    for (double eps : {0.1, 0.5, 1.0}) {
        WedgeParams p(0.75, eps);
        for (int i = 0; i < 300; ++i) {
            cplx z = random_wedge_point(rng, 0.75);
            cplx a = map_to_halfplane_moebius(z, p), b = map_to_halfplane_pole(z, p);
            CHECK(std::abs(a - b) <= 1e-9 * (1 + std::abs(a)));
        }
        // the corner lands below the real axis: it is cut off from the smoothed domain
        cplx w0 = map_to_halfplane({0.0, 0.0}, p);
        CHECK_THAT(std::abs(w0 - cplx(0.0, -eps) / (1 + eps * eps)), WithinAbs(0.0, 1e-15));
        CHECK(w0.imag() < 0.0);
    }
}

TEST_CASE("map derivative matches a central difference") {
    std::mt19937_64 rng(5);
    for (double eps : {0.0, 0.3, 1.0}) {
        WedgeParams p(0.75, eps);
        for (int i = 0; i < 200; ++i) {
            cplx z = random_wedge_point(rng, 0.75);
            if (distance_to_wedge_boundary(z, p.opening()) < 1e-3 * std::abs(z)) continue;
            double hstep = 1e-5 * std::abs(z);
            cplx fd = (map_to_halfplane(z + hstep, p) - map_to_halfplane(z - hstep, p)) / (2 * hstep);
            cplx d = map_derivative(z, p);
            CHECK(std::abs(fd - d) <= 1e-6 * std::abs(d));
            CHECK(std::abs(map_derivative_at_image(map_to_halfplane(z, p), p) - d) <= 1e-9 * std::abs(d));
        }
    }
    CHECK(map_derivative({0.0, 0.0}, WedgeParams(0.75)) == cplx{});
}

TEST_CASE("distance to the wedge boundary") {
    const double open = 0.75 * pi;
    CHECK_THAT(distance_to_wedge_boundary({1.0, 1.0}, open), WithinAbs(1.0, 1e-15));
    CHECK_THAT(distance_to_wedge_boundary(std::polar(2.0, 0.1), open), WithinAbs(2 * std::sin(0.1), 1e-15));
    // beyond a right angle from a wall, the nearest boundary point is the corner
    CHECK_THAT(distance_to_wedge_boundary(std::polar(2.0, 0.7 * pi), WedgeParams(0.9).opening()), WithinAbs(2 * std::sin(0.2 * pi), 1e-14));
    CHECK(distance_to_wedge_boundary({0.0, 0.0}, open) == 0.0);
}
