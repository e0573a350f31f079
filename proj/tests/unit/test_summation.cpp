#include <catch_amalgamated.hpp>

#include <random>

#include <cornerflow/summation.hpp>

using namespace cornerflow;

TEST_CASE("compensated sum recovers cancelled low-order bits") {
    CompensatedSum s;
    s.add(1.0);
    for (int i = 0; i < 1000; ++i) s.add(1e-16);
    s.add(-1.0);
    CHECK_THAT(s.value(), Catch::Matchers::WithinRel(1e-13, 1e-12));
}

TEST_CASE("deterministic sum does not depend on the worker count") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> xs(100003);
    for (double& x : xs) x = n(rng) * std::pow(10.0, n(rng) * 3);
    double ref = deterministic_sum(xs, 1);
    for (unsigned t : {2u, 3u, 8u, 17u}) CHECK(deterministic_sum(xs, t) == ref);
    CHECK(deterministic_sum(std::vector<double>{}, 4) == 0.0);
}

TEST_CASE("parallel_for visits every index once and forwards exceptions") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 6, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}

TEST_CASE("thread count resolution") {
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
}
