#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <boost/numeric/odeint.hpp>

#include <cornerflow/flow.hpp>

using namespace cornerflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double nu = 0.75;
const AnnularSector patch{0.1, 0.5, 0.0, 0.5 * nu * pi, 1.0};

IntegratorControls fixed_steps(double dt, double T, int outputs = 1) {
    IntegratorControls c;
    c.dt_max = dt;
    c.cfl_fraction = std::numeric_limits<double>::infinity();
    c.geometric_levels = 0;
    c.geometric_anchor = T / outputs;
    c.linear_samples = std::max(1, outputs - 1);
    return c;
}

VortexEnsemble three_vortices() {
    return VortexEnsemble::from_points(nu, 0.0, {std::polar(0.3, 0.2), std::polar(0.5, 0.6), std::polar(0.2, 1.0)},
                                       {1.0, 0.5, 0.8});
}

struct CoarseRun {
    InitialVorticity w0{patch};
    VortexEnsemble ens = discretize(w0, 0.04, nu);
    double b0 = b_zero(w0, nu);
    FlowTrace tr;
    CoarseRun(double sign = 1.0) {
        IntegratorControls c;
        c.dt_max = 0.02;
        c.geometric_anchor = 0.5;
        c.linear_samples = 30;
        auto e = sign > 0 ? ens : ens.negated();
        tr = integrate(e, 2.0, c, WedgeParams(nu), KernelConfig::for_cell_size(0.04), corner_tracers(nu, 0.2),
                       corner_probe_points(nu, 0.4));
    }
};

const CoarseRun& coarse() {
    static const CoarseRun run;
    return run;
}

}  // namespace

TEST_CASE("a single vortex drifts parallel to the wall as its image dictates") {
    // dY/dt = (gamma / (4 pi nu^2 Im Y)) |Y|^{2 - 2 nu}, Im Y frozen
    const double gamma = 1.0, y = 0.2, x0 = 0.3, T = 1.0;
    namespace ode = boost::numeric::odeint;
    std::vector<double> state{x0};
    auto rhs = [&](const std::vector<double>& s, std::vector<double>& d, double) {
        d[0] = gamma / (4 * pi * nu * nu * y) * std::pow(s[0] * s[0] + y * y, 1 - nu);
    };
    ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<std::vector<double>>()), rhs,
                            state, 0.0, T, 1e-3);

    auto ens = VortexEnsemble::from_points(nu, 0.0, {sector_power({x0, y}, nu)}, {gamma});
    auto tr = integrate(ens, T, fixed_steps(0.01, T), WedgeParams(nu), {});
    cplx yT = tr.positions_h.back()[0];
    CHECK_THAT(yT.imag(), WithinAbs(y, 1e-13));
    CHECK_THAT(yT.real(), WithinAbs(state[0], 1e-9));
    CHECK(yT.real() > x0);
}

TEST_CASE("RK4 converges at fourth order and RK2 at second") {
    const double T = 0.5;
    KernelConfig k{0.05, true, 1};
    auto ens = three_vortices();
    auto final_at = [&](double dt, Scheme s) {
        auto c = fixed_steps(dt, T);
        c.scheme = s;
        return integrate(ens, T, c, WedgeParams(nu), k).positions_h.back();
    };
    auto err = [](const std::vector<cplx>& a, const std::vector<cplx>& b) {
        double m = 0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    };
    auto ref = final_at(0.05 / 64, Scheme::rk4);
    double e1 = err(final_at(0.05, Scheme::rk4), ref), e2 = err(final_at(0.025, Scheme::rk4), ref);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
    double r1 = err(final_at(0.05, Scheme::rk2), ref), r2 = err(final_at(0.025, Scheme::rk2), ref);
    CHECK(r1 / r2 > 3.0);
    CHECK(r1 / r2 < 5.0);
}

TEST_CASE("reversing the circulations retraces the trajectories") {
    const double T = 0.5;
    KernelConfig k{0.05, true, 1};
    auto ens = three_vortices();
    auto fwd = integrate(ens, T, fixed_steps(0.005, T), WedgeParams(nu), k);
    auto back_start = VortexEnsemble::from_points(nu, 0.0, fwd.positions.back(), {-1.0, -0.5, -0.8});
    auto back = integrate(back_start, T, fixed_steps(0.005, T), WedgeParams(nu), k);
    for (std::size_t i = 0; i < ens.size(); ++i) CHECK(std::abs(back.positions.back()[i] - ens.positions_omega[i]) < 1e-9);
}

TEST_CASE("half-plane integration agrees with integrating in the wedge directly") {
    const double T = 0.2, dt = 0.01;
    const WedgeParams p(nu);
    KernelConfig k{0.05, true, 1};
    auto full = discretize(patch, 0.04, nu);
    VortexEnsemble ens;
    ens.nu = nu;
    for (std::size_t i = 0; i < 50; ++i) ens.push_back(full.positions_omega[i], full.circulations[i]);

    auto tr = integrate(ens, T, fixed_steps(dt, T), p, k);

    // classical RK4 on dX/dt = velocity(X)
    std::vector<cplx> x = ens.positions_omega;
    auto vel = [&](const std::vector<cplx>& pos) {
        auto e = VortexEnsemble::from_points(nu, 0.0, pos, ens.circulations);
        std::vector<cplx> u(pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) u[i] = velocity(e, pos[i], p, k);
        return u;
    };
    auto shift = [](const std::vector<cplx>& a, double s, const std::vector<cplx>& d) {
        std::vector<cplx> o(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] + s * d[i];
        return o;
    };
    for (int n = 0; n < static_cast<int>(std::lround(T / dt)); ++n) {
        auto k1 = vel(x), k2 = vel(shift(x, dt / 2, k1)), k3 = vel(shift(x, dt / 2, k2)), k4 = vel(shift(x, dt, k3));
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt / 6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - tr.positions.back()[i]));
    CHECK(worst < 1e-8);
}

TEST_CASE("circulations are carried unchanged and zero circulation freezes the flow") {
    auto ens = three_vortices();
    auto tr = integrate(ens, 0.2, fixed_steps(0.01, 0.2, 4), WedgeParams(nu), {0.05, true, 1});
    CHECK(tr.circulations == ens.circulations);
    CHECK(tr.times.size() == 5);

    auto still = VortexEnsemble::from_points(nu, 0.0, ens.positions_omega, {0.0, 0.0, 0.0});
    auto tz = integrate(still, 1.0, fixed_steps(0.1, 1.0, 4), WedgeParams(nu), {0.05, true, 1});
    for (const auto& frame : tz.positions)
        for (std::size_t i = 0; i < frame.size(); ++i) CHECK(frame[i] == tz.positions[0][i]);
    auto rm = right_motion_check(tz, 10.0, 1.0);
    CHECK(rm.pass);
    CHECK(rm.max_ratio == 0.0);
    auto fl = long_time_floor_check(tz, 0.25, 1.0);
    double min_r = 1e9;
    for (cplx z : ens.positions_omega)
        if (std::arg(z) <= 0.5 * nu * pi) min_r = std::min(min_r, std::abs(z));
    CHECK_THAT(fl.fitted_constant, WithinRel(min_r, 1e-12));
}

TEST_CASE("trajectories do not depend on the worker count") {
    auto ens = discretize(patch, 0.04, nu);
    IntegratorControls c;
    c.dt_max = 0.05;
    auto a = integrate(ens, 0.5, c, WedgeParams(nu), {0.05, true, 1}, corner_tracers(nu, 0.2));
    auto b = integrate(ens, 0.5, c, WedgeParams(nu), {0.05, true, 6}, corner_tracers(nu, 0.2));
    CHECK(a.positions == b.positions);
    CHECK(a.times == b.times);
}

TEST_CASE("step agrees with a single integrator step") {
    auto ens = three_vortices();
    KernelConfig k{0.05, true, 1};
    auto one = step(ens, 0.01, WedgeParams(nu), k);
    auto tr = integrate(ens, 0.01, fixed_steps(0.01, 0.01), WedgeParams(nu), k);
    for (std::size_t i = 0; i < ens.size(); ++i) CHECK(one.positions_h[i] == tr.positions_h.back()[i]);
    CHECK_THROWS_AS(step(ens, 0.01, WedgeParams(nu, 0.5), k), DomainError);
}

TEST_CASE("integrator guards") {
    auto ens = three_vortices();
    auto c = fixed_steps(0.01, 0.1);
    c.blowup_bound = 0.1;
    CHECK_THROWS_AS(integrate(ens, 0.1, c, WedgeParams(nu), {0.05, true, 1}), BlowUpError);
    CHECK_THROWS_AS(integrate(ens, -1.0, fixed_steps(0.01, 0.1), WedgeParams(nu), {}), std::invalid_argument);
}

TEST_CASE("output grid is geometric near zero and linear afterwards") {
    IntegratorControls c;
    c.geometric_levels = 3;
    c.geometric_anchor = 0.5;
    c.linear_samples = 3;
    auto ts = output_times(2.0, c);
    std::vector<double> expect{0.0, 0.0625, 0.125, 0.25, 0.5, 1.0, 1.5, 2.0};
    REQUIRE(ts.size() == expect.size());
    for (std::size_t i = 0; i < ts.size(); ++i) CHECK_THAT(ts[i], WithinAbs(expect[i], 1e-15));
}

TEST_CASE("corner probe on the uniform patch") {
    const auto& run = coarse();
    CHECK_THROWS_AS(corner_probe(run.tr, run.b0, run.b0), std::invalid_argument);
    CHECK_THROWS_AS(corner_probe(run.tr, run.b0, 0.0), std::invalid_argument);
    auto w = corner_probe(run.tr, run.b0, 0.5 * run.b0);
    CHECK(w.nonempty());
    // a looser tolerance never shrinks the window
    auto wide = corner_probe(run.tr, run.b0, 0.9 * run.b0);
    CHECK(wide.R >= w.R);
    // at t = 0 the sampled b tends to b0 at the corner
    double prev = 1e9;
    const auto& b = run.tr.b_corner_series[0];
    for (int ring = 0; ring < 25; ring += 6) {
        double worst = 0;
        for (int a = 0; a < 9; ++a) worst = std::max(worst, std::abs(b[ring * 9 + a] - run.b0));
        CHECK(worst <= prev);
        prev = worst;
    }
}

TEST_CASE("trajectory lower bound on the uniform patch") {
    CHECK(corner_lower_bound(0.0, 0.15, 0.05, nu) == 0.0);
    CHECK_THAT(corner_lower_bound(2.0, 0.15, 0.05, nu), WithinRel(std::pow(8.0 / 9.0 * 0.1 * 2.0, 1.5), 1e-14));
    const auto& run = coarse();
    const double eps = 0.5 * run.b0;
    auto w = corner_probe(run.tr, run.b0, eps);
    auto r = trajectory_lower_bound_check(run.tr, run.b0, eps, w.R, w.T_window, nu);
    CHECK(r.pass);
    CHECK(r.fitted_constants.at("tracked_particles") > 0);
    auto rm = right_motion_check(run.tr, std::pow(2 * w.R, 1 / nu), w.T_window);
    CHECK(rm.pass);
    CHECK(rm.n_samples > 0);
    auto none = right_motion_check(run.tr, 1e-9, w.T_window);
    CHECK(none.n_samples == 0);
}

TEST_CASE("reversed vorticity fails the lower bound") {
    const CoarseRun wrong(-1.0);
    const double eps = 0.5 * wrong.b0;
    auto w = corner_probe(coarse().tr, wrong.b0, eps);
    auto r = trajectory_lower_bound_check(wrong.tr, wrong.b0, eps, w.R, w.T_window, nu);
    CHECK_FALSE(r.pass);
    CHECK(r.violations > 0);
    auto rm = right_motion_check(wrong.tr, std::pow(2 * w.R, 1 / nu), w.T_window);
    CHECK_FALSE(rm.pass);
}

TEST_CASE("distance sandwich and long-time floor on the uniform patch") {
    const auto& run = coarse();
    auto d = distance_bound_check(run.tr, 1.0);
    CHECK(d.pass);
    CHECK(run.tr.clamp_events == 0);
    CHECK(d.fitted_constants.at("C1") > 0);
    CHECK_THROWS_AS(distance_bound_check(run.tr, 0.0), std::invalid_argument);

    auto f1 = long_time_floor_check(run.tr, 0.5, 1.0), f2 = long_time_floor_check(run.tr, 0.5, 2.0);
    CHECK(f2.pass);
    CHECK(f2.fitted_constant > 0);
    CHECK(f2.fitted_constant <= f1.fitted_constant);
    CHECK_THROWS_AS(long_time_floor_check(run.tr, 0.5, 3.0), std::invalid_argument);
}

TEST_CASE("distance sandwich holds with unit constants at t = 0 only") {
    const auto& run = coarse();
    FlowTrace first = run.tr;
    first.times.resize(2);
    first.positions.resize(2);
    first.positions_h.resize(2);
    first.positions[1] = first.positions[0];
    first.positions_h[1] = first.positions_h[0];
    auto d = distance_bound_check(first, 1.0);
    CHECK_THAT(d.fitted_constants.at("c_fit"), WithinAbs(0.0, 0.0));
}

TEST_CASE("trace CSV schema") {
    const auto& run = coarse();
    auto path = std::filesystem::temp_directory_path() / "cornerflow_trace_test.csv";
    write_trace_csv(run.tr, path.string());
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "t,particle_id,re_x,im_x,re_y,im_y");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == run.tr.times.size() * run.tr.n_particles());
    std::filesystem::remove(path);
}

TEST_CASE("report JSON schema") {
    const auto& run = coarse();
    auto path = std::filesystem::temp_directory_path() / "cornerflow_reports_test.json";
    write_reports_json({distance_bound_check(run.tr, 1.0)}, path.string());
    std::ifstream in(path);
    auto j = json::parse(in);
    REQUIRE(j.is_array());
    for (const char* key : {"check_name", "params", "n_samples", "max_ratio", "q99_ratio", "fitted_constants", "pass"})
        CHECK(j[0].contains(key));
    std::filesystem::remove(path);
}
