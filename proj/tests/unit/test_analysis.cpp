#include <catch_amalgamated.hpp>

#include <cornerflow/analysis.hpp>

using namespace cornerflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Quasi-Monte Carlo with a partition of unity psi_i = |s-z_i|^-4 / sum_j |s-z_j|^-4: piece i is taken
// in polar coordinates about z_i with rho = rho_max u^{1/(2-alpha_i)}, which cancels its singularity.
double qmc_integral(const IntegralSpec& spec, double rho_max, long n_points) {
    const double g = 1.32471795724474602596, a1 = 1 / g, a2 = 1 / (g * g);
    const auto& nodes = spec.nodes;
    double total = 0.0;
    for (const auto& ni : nodes) {
        const double q = 2 - ni.alpha;
        double sum = 0.0;
        for (long k = 0; k < n_points; ++k) {
            double u = std::fmod(0.5 + a1 * k, 1.0), v = std::fmod(0.5 + a2 * k, 1.0);
            double rho = rho_max * std::pow(u, 1 / q);
            if (rho == 0.0) continue;
            cplx s = ni.z + std::polar(rho, 2 * pi * v);
            double val = spec.f(s), wsum = 0.0, own = 0.0;
            if (val == 0.0) continue;
            bool keep = true;
            for (const auto& nj : nodes) {
                double d = std::abs(s - nj.z);
                if (d < spec.r || d > spec.R) keep = false;
                double w = std::pow(d, -4.0);
                wsum += w;
                if (&nj == &ni) {
                    own = w;
                    continue;
                }
                val *= std::pow(d, -nj.alpha);
            }
            if (!keep) continue;
            // rho * drho/du * rho^-alpha_i = rho_max^q / q
            sum += own / wsum * val;
        }
        total += 2 * pi * std::pow(rho_max, q) / q * sum / static_cast<double>(n_points);
    }
    return total;
}

}  // namespace

TEST_CASE("integral_I closed forms") {
    CHECK_THAT(integral_I({{{0.0, 0.0}}, WeightFn::constant(1), 0.0, 1.0}), WithinRel(pi, 1e-10));
    CHECK_THAT(integral_I({{{0.0, 1.0}}, WeightFn::constant(1), 0.0, 1.0}), WithinRel(2 * pi, 1e-10));
    CHECK_THAT(integral_I({{{0.3, 0.0}}, WeightFn::disk(0.0, 1.0), 0.0}), WithinRel(pi, 1e-10));
    CHECK_THAT(integral_I({{{0.0, 0.0}}, WeightFn::constant(1), 0.5, 1.0}), WithinRel(0.75 * pi, 1e-10));
    CHECK_THAT(integral_I({{{0.0, 1.0}}, WeightFn::constant(1), 0.25, 2.0}), WithinRel(2 * pi * 1.75, 1e-10));
    // unbounded region, integrable tail: 2 pi int_r^inf rho^-2 drho
    CHECK_THAT(integral_I({{{0.0, 3.0}}, WeightFn::constant(1), 0.5}), WithinRel(4 * pi, 1e-8));
    double lens = 2 * std::acos(0.25) - 0.25 * std::sqrt(3.75);
    CHECK_THAT(integral_I({{{0.0, 0.0}, {0.5, 0.0}}, WeightFn::constant(1), 0.0, 1.0}), WithinRel(lens, 1e-9));
    CHECK(integral_I({{{0.0, 1.0}}, WeightFn::zero(), 0.0}) == 0.0);
}

TEST_CASE("integral_I against quasi-Monte Carlo") {
    const double nu = 0.75;
    IntegralSpec corner{{{0.0, 1 - nu}, {cplx(0.3, 0.2), 1.0}, {cplx(0.35, 0.25), 1.0}}, WeightFn::disk(0.0, 1.0), 0.0};
    CHECK_THAT(integral_I(corner), WithinRel(qmc_integral(corner, 1.5, 2000000), 1e-3));

    IntegralSpec clipped{{{0.1, 0.5}, {cplx(0.4, 0.1), 1.5}}, WeightFn::gaussian(cplx(0.2, 0.0), 0.3, 2.0), 0.02, 0.8};
    CHECK_THAT(integral_I(clipped), WithinRel(qmc_integral(clipped, 0.8, 2000000), 1e-3));
}

TEST_CASE("integral_I is monotone in the region and linear in f") {
    std::vector<Node> nodes{{0.0, 0.5}, {cplx(0.2, 0.1), 1.0}};
    auto f = WeightFn::disk(cplx(0.1, 0.0), 1.0);
    double prev = 0.0;
    for (double R : {0.1, 0.3, 0.6, 1.0, 2.0}) {
        double v = integral_I({nodes, f, 0.0, R});
        CHECK(v >= prev);
        prev = v;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double r : {0.0, 0.01, 0.05, 0.1}) {
        double v = integral_I({nodes, f, r});
        CHECK(v <= prev);
        prev = v;
    }
    double base = integral_I({nodes, f, 0.0});
    CHECK_THAT(integral_I({nodes, f.scaled(3.5), 0.0}), WithinRel(3.5 * base, 1e-12));
}

TEST_CASE("integral_I reports divergence") {
    CHECK_THROWS_AS(integral_I({{{0.0, 2.0}}, WeightFn::disk(0.0, 1.0), 0.0}), DivergenceError);
    CHECK_THROWS_AS(integral_I({{{0.0, 1.0}, {1.0, 1.0}}, WeightFn::constant(1), 0.1}), DivergenceError);
    CHECK_NOTHROW(integral_I({{{0.0, 2.0}}, WeightFn::disk(0.0, 1.0), 0.1}));
}

TEST_CASE("power moments") {
    CHECK_THAT(power_moment(0.0, 2.0, 0.0), WithinRel(2.0, 1e-15));
    CHECK_THAT(power_moment(1.0, std::exp(1.0), 2.0), WithinRel(1.0, 1e-15));
    CHECK_THAT(power_moment(0.5, 1.0, 3.0), WithinRel(1.0, 1e-15));
    CHECK(std::isinf(power_moment(0.0, 1.0, 2.0)));
}

TEST_CASE("Gronwall sandwich") {
    for (auto [c, R, y0, T] : std::vector<std::array<double, 4>>{{1, 10, 0.5, 2}, {0.1, 2, 0.9, 1}, {2, 1, 1e-3, 3}}) {
        auto r = gronwall_phi_check(c, R, y0, T);
        CHECK(r.pass);
        CHECK(r.max_ratio <= 1.0 + 1e-9);
    }
    auto still = gronwall_phi_check(0.0, 1.0, 0.3, 1.0);
    CHECK(still.pass);
    CHECK_THAT(still.fitted_constants.at("upper_constant_needed"), WithinRel(1.0, 1e-12));
    auto at_cap = gronwall_phi_check(1.0, 0.4, 0.4, 2.0);
    CHECK(at_cap.pass);
    CHECK_THROWS_AS(gronwall_phi_check(1.0, 0.1, 0.4, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(gronwall_phi_check(-1.0, 1.0, 0.4, 2.0), std::invalid_argument);
}

TEST_CASE("powers inequality") {
    for (double nu : {0.55, 0.75, 0.9, 1.5}) {
        auto r = powers_inequality_check(nu, 5000, 2);
        INFO("nu=" << nu);
        CHECK(r.pass);
        CHECK(r.fitted_constants.at("two_term_lower") > 0);
    }
    // nu = 2 on a quarter plane: |a^2 - b^2| / (|a-b| max) = |a+b| / max lies in [1, 2]
    auto sq = powers_inequality_check(2.0, 5000, 3);
    CHECK(sq.fitted_constants.at("two_term_lower") >= 1.0 - 1e-12);
    CHECK(sq.fitted_constants.at("two_term_upper") <= 2.0 + 1e-12);
    CHECK_THROWS_AS(powers_inequality_check(1.0, 10), std::invalid_argument);
}

TEST_CASE("two-node bound and its control") {
    auto r = itwo_bound_check(8, 1);
    CHECK(r.pass);
    CHECK(r.stability_factor <= 2.0);
    auto ctl = itwo_bound_check(8, 1, true);
    CHECK_FALSE(ctl.pass);
    CHECK(ctl.growth_factor > ctl.growth_bound);
}

TEST_CASE("three-node bound and its control") {
    auto r = ithree_bound_check(0.75, 6, 1);
    CHECK(r.pass);
    CHECK(r.stability_factor <= 2.0);
    auto ctl = ithree_bound_check(0.75, 6, 1, true);
    CHECK_FALSE(ctl.pass);
}

TEST_CASE("closest-pair reduction") {
    auto r = iest_reduction_check({{{0.0, 1.0}, {1.0, 1.0}}, WeightFn::constant(1), 0.0, 4.0}, 6);
    CHECK(r.pass);
    CHECK_THROWS_AS(iest_reduction_check({{{0.0, 1.0}}, WeightFn::constant(1), 0.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(iest_reduction_check({{{0.0, 1.0}, {1.0, 1.0}, {0.5, 1.0}}, WeightFn::constant(1), 0.0, 4.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(iest_reduction_check({{{0.0, 1.0}, {1.0, 1.0}}, WeightFn::constant(1), 0.9, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(iest_reduction_check({{{0.0, 0.0}, {1.0, 1.0}}, WeightFn::constant(1), 0.0, 4.0}), std::invalid_argument);
}
