#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <cornerflow/energy.hpp>

using namespace cornerflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

FlowTrace toy_trace(std::vector<std::vector<cplx>> frames, std::vector<double> times, std::size_t n_active) {
    FlowTrace tr;
    tr.times = std::move(times);
    tr.positions = std::move(frames);
    tr.positions_h = tr.positions;
    tr.n_active = n_active;
    return tr;
}

}  // namespace

TEST_CASE("log-Lipschitz modulus") {
    CHECK(phi(0.0) == 0.0);
    CHECK_THAT(phi(0.01), WithinRel(0.01 * std::log(100.0), 1e-14));
    CHECK_THAT(phi(2.0), WithinRel(2.0, 1e-15));
    const double knee = std::exp(-1.0);
    CHECK_THAT(phi(knee * (1 - 1e-12)), WithinAbs(phi(knee * (1 + 1e-12)), 1e-11));
    double prev = 0;
    for (int k = -300; k <= 30; ++k) {
        double v = phi(std::pow(10.0, k / 10.0));
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(phi(-1e-3), DomainError);
}

TEST_CASE("E1 of two traces") {
    auto a = toy_trace({{{0, 1}, {1, 1}}, {{0, 2}, {1, 2}}}, {0.0, 1.0}, 2);
    auto b = toy_trace({{{0, 1}, {1, 1}}, {{0, 2.5}, {1, 1}}}, {0.0, 1.0}, 2);
    auto ens = VortexEnsemble::from_points(0.75, 0.0, {{0, 1}, {1, 1}}, {2.0, -3.0});
    auto e = e1(a, b, ens);
    CHECK(e.e1[0] == 0.0);
    CHECK_THAT(e.e1[1], WithinRel(0.5 * 2.0 + 1.0 * 3.0, 1e-15));
    CHECK(e1(a, a, ens).e1[1] == 0.0);

    auto c = toy_trace({{{0, 1}, {1, 1}}}, {0.0}, 2);
    CHECK_THROWS_AS(e1(a, c, ens), MismatchedTraceError);
    auto wrong = VortexEnsemble::from_points(0.75, 0.0, {{0, 1}}, {1.0});
    CHECK_THROWS_AS(e1(a, b, wrong), MismatchedTraceError);
}

TEST_CASE("E1 over tracers uses the reference weights") {
    auto a = toy_trace({{{0, 1}, {5, 5}}, {{0, 1}, {5, 6}}}, {0.0, 1.0}, 1);
    auto b = toy_trace({{{0, 1}, {0, 0}, {5, 5}}, {{0, 1}, {0, 0}, {5, 5}}}, {0.0, 1.0}, 2);
    auto ref = VortexEnsemble::from_points(0.75, 0.0, {{5, 5}}, {0.25});
    auto e = e1_tracers(a, b, ref);
    CHECK_THAT(e.e1[1], WithinRel(0.25, 1e-15));
}

TEST_CASE("weighted energy") {
    EnergyTrace e;
    e.times = {0.0, 0.5, 2.0};
    e.e1 = {0.0, 1.0, 4.0};
    auto w = weighted_energy(e, 2.0);
    CHECK(w.e_weighted[0] == 0.0);
    CHECK_THAT(w.e_weighted[1], WithinRel(4.0, 1e-15));
    CHECK_THAT(w.e_weighted[2], WithinRel(1.0, 1e-15));
    e.e1[0] = 1.0;
    CHECK(std::isinf(weighted_energy(e, 1.0).e_weighted[0]));
    CHECK_THROWS_AS(weighted_energy(e, 0.0), std::invalid_argument);
}

TEST_CASE("growth fit recovers an exact power") {
    std::vector<double> t, v;
    for (int k = 0; k <= 60; ++k) {
        t.push_back(std::pow(10.0, -3.0 + k / 20.0));
        v.push_back(7.0 * std::pow(t.back(), 1.5));
    }
    CHECK_THAT(e1_growth_fit(t, v, 1e-3, 1.0), WithinAbs(1.5, 1e-12));
    v[10] = 0.0;
    CHECK_THROWS_AS(e1_growth_fit(t, v, 1e-3, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(e1_growth_fit(t, v, 2.0, 3.0), std::invalid_argument);
}

TEST_CASE("choose_constants") {
    auto c = choose_constants(2.0, 0.75, 0.148);
    CHECK_THAT(c.p, WithinRel(2.0, 1e-15));
    CHECK(c.eps > 0);
    CHECK(c.eps < 0.148);
    // defining inequalities, restated
    CHECK(c.p > 1.5);
    CHECK(2 / c.p < (1 + c.eps * (1 - 1.5)) / 0.75);
    CHECK((0.148 + c.eps) / (0.148 - c.eps) < 2.0);
    CHECK_THROWS_AS(choose_constants(1.0, 0.75, 0.148), std::invalid_argument);
    CHECK_THROWS_AS(choose_constants(3.0, 0.75, 0.148), std::invalid_argument);
    CHECK_THROWS_AS(choose_constants(2.0, 0.75, -1.0), std::invalid_argument);
}

TEST_CASE("model ODE against its closed form") {
    ModelOdeSolution exact{0.75};
    CHECK_THAT(exact(1.0), WithinRel(std::pow(2.0 / 3.0, 1.5), 1e-15));
    CHECK_THAT(exact(1.0), WithinRel(0.54433, 1e-5));
    auto tr = model_ode_integrate(0.75, 1e-8, 1.0);
    CHECK_THAT(tr.values.back(), WithinRel(exact(1.0), 1e-3));
    // the closed form solves the equation away from the delay
    ModelOdeSolution late{0.6, 0.3};
    for (double t : {0.5, 1.0, 2.0}) {
        double hstep = 1e-6;
        CHECK_THAT((late(t + hstep) - late(t - hstep)) / (2 * hstep), WithinRel(late.derivative(t), 1e-6));
    }
    CHECK(late(0.2) == 0.0);
    CHECK_THROWS_AS(model_ode_integrate(0.75, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("weighted-energy demo on the model pair") {
    auto grid = geometric_grid(1.0);
    auto a = model_ode_integrate(0.75, 1e-8, grid), b = model_ode_integrate(0.75, 2e-8, grid);
    auto rep = model_energy_demo(0.75, 1.0, 0.1, a, b);
    CHECK(rep.step1.pass);
    CHECK(rep.step2.pass);
    CHECK(rep.step3.pass);
    CHECK(rep.step2.fitted_constants.at("witness_slope") >= 1.45);
    CHECK(rep.step2.fitted_constants.at("witness_slope") <= 1.5 + 1e-6);
    CHECK(reports(rep).size() == 3);

    CHECK_THROWS_AS(model_energy_demo(0.75, 5.0, 0.1, a, b), WindowViolationError);
    auto shorter = b;
    shorter.times.pop_back();
    CHECK_THROWS_AS(model_energy_demo(0.75, 1.0, 0.1, a, shorter), MismatchedTraceError);
}

TEST_CASE("a delayed solution makes the weighted energy grow") {
    // the delayed branch sits at zero for t < 0.5, so t^-alpha |gap| = C t^(1.5 - alpha) increases there
    auto grid = geometric_grid(1.0);
    auto a = sample(ModelOdeSolution{0.75, 0.0}, grid), b = sample(ModelOdeSolution{0.75, 0.5}, grid);
    auto delayed = model_energy_demo(0.75, 1.4, 0.1, a, b);
    CHECK_FALSE(delayed.step1.pass);
    CHECK_FALSE(delayed.step3.pass);
}

TEST_CASE("energy CSV schema") {
    EnergyTrace e;
    e.times = {0.0, 1.0};
    e.e1 = {0.0, 0.5};
    auto path = std::filesystem::temp_directory_path() / "cornerflow_energy_test.csv";
    write_energy_csv(weighted_energy(e, 1.0), path.string());
    std::ifstream in(path);
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    CHECK(header == "t,e1,e_weighted,alpha");
    CHECK(row0 == "0,0,0,1");
    CHECK(row1 == "1,0.5,0.5,1");
    std::filesystem::remove(path);
}

TEST_CASE("self-convergence study on a coarse pair of levels") {
    InitialVorticity w0(AnnularSector{0.1, 0.5, 0.0, 0.375 * pi, 1.0});
    auto st = self_convergence_study(w0, WedgeParams(0.75), 0.08, 0.04, 0.4, 3, 2.0, 4, 1);
    REQUIRE(st.levels.size() == 3);
    CHECK(std::isnan(st.levels[0].e1_vs_previous));
    CHECK(st.levels[1].e1_vs_previous > 0);
    CHECK(st.levels[2].n_particles > st.levels[1].n_particles);
    CHECK(st.finest_pair.times.size() == 5);
    CHECK(st.finest_pair.e1.front() == 0.0);
    CHECK(st.report.fitted_constants.count("reduction_factor_2") == 1);
    CHECK_THROWS_AS(self_convergence_study(w0, WedgeParams(0.75), 0.08, 0.04, 0.4, 1), std::invalid_argument);
}
