#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "catalog.hpp"
#include "config.hpp"
#include "energy.hpp"
#include "flow.hpp"
#include "kernel.hpp"

namespace cornerflow {

struct RunResult {
    std::string subcommand;
    std::vector<BoundCheckReport> reports;
    json summary = json::object();

    bool pass() const {
        for (const auto& r : reports)
            if (!r.pass) return false;
        return true;
    }
};

namespace detail {

inline std::filesystem::path prepare_output(const ExperimentConfig& cfg) {
    std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void keep(RunResult& res, const ExperimentConfig& cfg, const std::string& name, BoundCheckReport r) {
    if (cfg.selected(name)) res.reports.push_back(std::move(r));
}

inline BoundCheckReport value_report(const std::string& name, json params, double value, bool ok) {
    BoundCheckReport r;
    r.check_name = name;
    r.params = std::move(params);
    r.n_samples = 1;
    r.max_ratio = value;
    r.q99_ratio = value;
    r.fitted_constant = value;
    r.settle(ok);
    return r;
}

inline void require_unsmoothed_config(const ExperimentConfig& cfg) {
    if (cfg.eps != 0.0) throw ConfigError("<config>", 0, "wedge.eps", "simulations run on the exact wedge; set eps = 0");
}

struct Simulation {
    InitialVorticity w0;
    VortexEnsemble ens;
    FlowTrace trace;
};

inline Simulation simulate(const ExperimentConfig& cfg, bool with_probes) {
    require_unsmoothed_config(cfg);
    const auto p = cfg.wedge();
    auto w0 = cfg.initial_vorticity();
    auto ens = discretize(w0, cfg.h, cfg.nu);
    KernelConfig k{cfg.delta(), true, cfg.threads};
    std::vector<cplx> tracers = corner_tracers(cfg.nu, cfg.flow.tracer_radius), probes;
    if (with_probes) probes = corner_probe_points(cfg.nu, cfg.flow.probe_radius);
    auto tr = integrate(ens, cfg.T, cfg.integrator, p, k, tracers, probes);
    return {std::move(w0), std::move(ens), std::move(tr)};
}

inline json trace_summary(const Simulation& s) {
    return {{"n_vortices", s.ens.size()},
            {"n_tracers", s.trace.n_tracers()},
            {"steps", s.trace.steps},
            {"records", s.trace.times.size()},
            {"clamp_events", s.trace.clamp_events},
            {"warnings", s.trace.warnings}};
}

inline void write_energy_series(const std::vector<double>& t, const std::vector<double>& e1v, double alpha,
                                const std::filesystem::path& path) {
    EnergyTrace e;
    e.times = t;
    e.e1 = e1v;
    write_energy_csv(weighted_energy(std::move(e), alpha), path.string());
}

}  // namespace detail

inline void write_run_json(const RunResult& res, const ExperimentConfig& cfg, const std::string& path) {
    json reps = json::array();
    for (const auto& r : res.reports) reps.push_back(to_json(r));
    json j = {{"subcommand", res.subcommand}, {"config", to_json(cfg)}, {"summary", res.summary}, {"reports", reps},
              {"pass", res.pass()}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << '\n';
}

inline RunResult run_simulate(const ExperimentConfig& cfg) {
    RunResult res{"simulate", {}, {}};
    auto dir = detail::prepare_output(cfg);
    auto sim = detail::simulate(cfg, false);
    write_trace_csv(sim.trace, (dir / "trace.csv").string());
    res.summary = detail::trace_summary(sim);
    return res;
}

inline RunResult run_verify_flow(const ExperimentConfig& cfg) {
    RunResult res{"verify-flow", {}, {}};
    auto dir = detail::prepare_output(cfg);
    auto sim = detail::simulate(cfg, true);
    const auto& tr = sim.trace;
    write_trace_csv(tr, (dir / "trace.csv").string());
    res.summary = detail::trace_summary(sim);

    const auto& f = cfg.flow;
    const double b0 = b_zero(sim.w0, cfg.nu);
    const double eps = f.eps_fraction * std::min(b0, 1.0);
    auto win = corner_probe(tr, b0, eps, f.min_window);
    {
        auto r = detail::value_report("corner_probe", {{"eps", eps}, {"min_window", f.min_window}}, win.R, win.nonempty());
        r.fitted_constants = {{"b0", b0}, {"eps", eps}, {"R", win.R}, {"T_window", win.T_window}};
        if (!win.nonempty()) r.notes.push_back("no probe radius kept |b - b0| < eps past t = 0");
        detail::keep(res, cfg, "corner_probe", std::move(r));
    }
    if (win.nonempty()) {
        detail::keep(res, cfg, "trajectory_lower_bound_check",
                     trajectory_lower_bound_check(tr, b0, eps, win.R, win.T_window, cfg.nu, f.lower_bound_tol, f.angle_slack));
        detail::keep(res, cfg, "right_motion_check",
                     right_motion_check(tr, std::pow(2 * win.R, 1 / cfg.nu), win.T_window, f.right_motion_slack));
    } else {
        for (const char* name : {"trajectory_lower_bound_check", "right_motion_check"}) {
            auto r = detail::value_report(name, json::object(), 0.0, false);
            r.notes.push_back("skipped: the measured corner window is empty");
            detail::keep(res, cfg, name, std::move(r));
        }
    }
    detail::keep(res, cfg, "distance_bound_check", distance_bound_check(tr, f.c_rate));
    detail::keep(res, cfg, "long_time_floor_check", long_time_floor_check(tr, f.floor_t1, f.floor_t2, f.floor));
    return res;
}

inline RunResult run_verify_ode(const ExperimentConfig& cfg) {
    RunResult res{"verify-ode", {}, {}};
    auto dir = detail::prepare_output(cfg);
    const auto& e = cfg.energy;
    auto grid = geometric_grid(e.T);
    auto a = model_ode_integrate(e.nu, e.x0_a, grid), b = model_ode_integrate(e.nu, e.x0_b, grid);
    {
        double exact = ModelOdeSolution{e.nu, 0.0}(e.T);
        double rel = std::abs(a.values.back() - exact) / exact;
        auto r = detail::value_report("model_ode_integrate", {{"nu", e.nu}, {"x0", e.x0_a}, {"T", e.T}, {"rel_tol", 1e-3}},
                                      rel, rel <= 1e-3);
        r.fitted_constants = {{"x_T", a.values.back()}, {"closed_form", exact}, {"relative_error", rel}};
        detail::keep(res, cfg, "model_ode_integrate", std::move(r));
    }
    if (cfg.selected("model_energy_demo"))
        for (auto& r : reports(model_energy_demo(e.nu, e.alpha, e.eps, a, b, e.witness_delay))) res.reports.push_back(r);
    std::vector<double> gap(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) gap[k] = std::abs(a.values[k] - b.values[k]);
    detail::write_energy_series(a.times, gap, e.alpha, dir / "energy.csv");
    return res;
}

inline RunResult run_verify_energy(const ExperimentConfig& cfg) {
    RunResult res{"verify-energy", {}, {}};
    detail::require_unsmoothed_config(cfg);
    auto dir = detail::prepare_output(cfg);
    const auto& e = cfg.energy;
    {
        auto xs = detail::logspace(1e-12, 1e3, 200);
        std::size_t bad = 0;
        for (std::size_t k = 0; k + 1 < xs.size(); ++k)
            if (!(phi(xs[k + 1]) > phi(xs[k]))) ++bad;
        const double knee = std::exp(-1.0);
        double jump = std::abs(phi(knee * (1 + 1e-12)) - phi(knee * (1 - 1e-12)));
        auto r = detail::value_report("phi", {{"samples", xs.size()}}, jump, phi(0.0) == 0.0 && jump < 1e-10);
        r.violations = bad;
        r.n_samples = xs.size();
        r.fitted_constants["jump_at_knee"] = jump;
        r.settle(phi(0.0) == 0.0 && jump < 1e-10);
        detail::keep(res, cfg, "phi", std::move(r));
    }
    const auto w0 = cfg.initial_vorticity();
    const double b0 = b_zero(w0, cfg.nu);
    {
        const double alpha = 1.0 / (2 * cfg.nu - 1);
        BoundCheckReport r;
        try {
            auto k = choose_constants(alpha, cfg.nu, b0);
            r = detail::value_report("choose_constants", {{"alpha", alpha}, {"nu", cfg.nu}, {"b0", b0}}, k.eps, true);
            r.fitted_constants = {{"p", k.p}, {"eps", k.eps}};
        } catch (const std::exception& ex) {
            r = detail::value_report("choose_constants", {{"alpha", alpha}, {"nu", cfg.nu}, {"b0", b0}}, 0.0, false);
            r.notes.push_back(ex.what());
        }
        detail::keep(res, cfg, "choose_constants", std::move(r));
    }

    auto st = self_convergence_study(w0, cfg.wedge(), e.h0, e.dt0, e.e1_T, e.levels, e.min_factor, e.n_outputs, cfg.threads);
    json levels = json::array();
    for (const auto& lv : st.levels)
        levels.push_back({{"h", lv.h}, {"dt", lv.dt}, {"n_particles", lv.n_particles}, {"steps", lv.steps},
                          {"e1_vs_previous", finite_or_null(lv.e1_vs_previous)}});
    res.summary = {{"levels", levels}, {"b0", b0}};
    const auto& fp = st.finest_pair;
    {
        bool ok = !fp.e1.empty() && fp.e1.front() == 0.0;
        for (double v : fp.e1) ok = ok && std::isfinite(v) && v >= 0.0;
        auto r = detail::value_report("e1", {{"pair", "two finest refinement levels"}}, fp.e1.back(), ok);
        r.n_samples = fp.e1.size();
        r.fitted_constants = {{"e1_at_T", fp.e1.back()}, {"e1_at_0", fp.e1.front()}};
        detail::keep(res, cfg, "e1", std::move(r));
    }
    auto we = weighted_energy(fp, e.e1_alpha);
    write_energy_csv(we, (dir / "energy.csv").string());
    {
        double emax = 0.0;
        bool ok = true;
        for (std::size_t k = 1; k < we.times.size(); ++k) {
            ok = ok && std::isfinite(we.e_weighted[k]);
            emax = std::max(emax, we.e_weighted[k]);
        }
        auto r = detail::value_report("weighted_energy", {{"alpha", e.e1_alpha}}, emax, ok);
        r.n_samples = we.times.size();
        detail::keep(res, cfg, "weighted_energy", std::move(r));
    }
    {
        const double lo = e.e1_T / e.n_outputs;
        double slope = std::numeric_limits<double>::quiet_NaN();
        std::string note;
        try {
            slope = e1_growth_fit(fp, lo, e.e1_T);
        } catch (const std::exception& ex) {
            note = ex.what();
        }
        auto r = detail::value_report("e1_growth_fit", {{"t_lo", lo}, {"t_hi", e.e1_T}}, slope, std::isfinite(slope) && slope > 0);
        r.fitted_constants["slope"] = slope;
        if (!note.empty()) r.notes.push_back(note);
        detail::keep(res, cfg, "e1_growth_fit", std::move(r));
    }
    detail::keep(res, cfg, "e1_self_convergence", st.report);
    return res;
}

inline RunResult run_verify_appendix(const ExperimentConfig& cfg) {
    RunResult res{"verify-appendix", {}, {}};
    detail::prepare_output(cfg);
    const auto& a = cfg.appendix;
    const auto seed = cfg.seed;
    if (cfg.selected("integral_I")) {
        struct Case {
            const char* label;
            IntegralSpec spec;
            double exact;
        };
        const Case cases[] = {
            {"unit disk area", {{{0.0, 0.0}}, WeightFn::constant(1), 0.0, 1.0}, pi},
            {"inverse distance over the unit disk", {{{0.0, 1.0}}, WeightFn::constant(1), 0.0, 1.0}, 2 * pi},
            {"lens of two unit disks at distance 1/2", {{{0.0, 0.0}, {0.5, 0.0}}, WeightFn::constant(1), 0.0, 1.0},
             2 * std::acos(0.25) - 0.25 * std::sqrt(3.75)},
        };
        for (const auto& c : cases) {
            double v = integral_I(c.spec), rel = std::abs(v - c.exact) / c.exact;
            auto r = detail::value_report("integral_I", {{"case", c.label}, {"spec", to_json(c.spec)}}, rel, rel <= 1e-6);
            r.fitted_constants = {{"value", v}, {"closed_form", c.exact}, {"relative_error", rel}};
            res.reports.push_back(std::move(r));
        }
    }
    if (cfg.selected("gronwall_phi_check")) {
        const std::array<std::array<double, 4>, 5> cases{{{1, 10, 0.5, 2}, {0.1, 2, 0.9, 1}, {1, 10, 10, 3}, {0, 1, 0.3, 1}, {2, 1, 1e-3, 3}}};
        for (auto [c, R, y0, T] : cases) res.reports.push_back(gronwall_phi_check(c, R, y0, T));
    }
    if (cfg.selected("powers_inequality_check"))
        for (double nu : a.nu_values) res.reports.push_back(powers_inequality_check(nu, a.powers_samples, seed));
    if (cfg.selected("itwo_bound_check")) {
        res.reports.push_back(itwo_bound_check(a.itwo_configs, seed));
        if (a.negative_controls) {
            auto r = itwo_bound_check(a.itwo_configs, seed, true);
            res.reports.push_back(std::move(r));
        }
    }
    if (cfg.selected("ithree_bound_check")) {
        for (double nu : a.nu_values) res.reports.push_back(ithree_bound_check(nu, a.ithree_configs, seed));
        if (a.negative_controls) {
            auto r = ithree_bound_check(0.75, a.ithree_configs, seed, true);
            res.reports.push_back(std::move(r));
        }
    }
    if (cfg.selected("iest_reduction_check")) {
        res.reports.push_back(iest_reduction_check({{{0.0, 1.0}, {1.0, 1.0}}, WeightFn::constant(1), 0.0, 4.0}, a.iest_scales, seed));
        res.reports.push_back(iest_reduction_check(
            {{{0.0, 2.0}, {1.0, 1.0}, {cplx(0.5, 2.0), 0.5}}, WeightFn::disk(0.2, 3.0), 0.5}, a.iest_scales, seed));
    }
    res.summary = {{"negative_controls", a.negative_controls}};
    return res;
}

inline RunResult run_kernel_probe(const ExperimentConfig& cfg) {
    RunResult res{"kernel-probe", {}, {}};
    detail::prepare_output(cfg);
    if (cfg.selected("kernel_bound_check"))
        for (double eps : cfg.probe.eps_values)
            res.reports.push_back(kernel_bound_check(WedgeParams(cfg.nu, eps), cfg.probe.n_pairs, cfg.seed));
    const auto w0 = cfg.initial_vorticity();
    if (cfg.selected("b_zero")) {
        double b0 = b_zero(w0, cfg.nu);
        auto r = detail::value_report("b_zero", {{"nu", cfg.nu}}, b0, std::isfinite(b0) && b0 > 0);
        r.fitted_constants["b0"] = b0;
        res.reports.push_back(std::move(r));
    }
    if (cfg.selected("log_lipschitz_probe")) {
        auto ens = discretize(w0, cfg.h, cfg.nu);
        const double open = cfg.nu * pi;
        SectorRegion region{0.2, 0.4, 0.1 * open, 0.9 * open};
        KernelConfig k{cfg.delta(), true, cfg.threads};
        res.reports.push_back(log_lipschitz_probe(ens, region, cfg.wedge(), k, cfg.probe.n_pairs / 4, cfg.seed));
    }
    return res;
}

inline RunResult run_subcommand(const std::string& sub, const ExperimentConfig& cfg) {
    RunResult res;
    if (sub == "simulate") res = run_simulate(cfg);
    else if (sub == "verify-flow") res = run_verify_flow(cfg);
    else if (sub == "verify-ode") res = run_verify_ode(cfg);
    else if (sub == "verify-energy") res = run_verify_energy(cfg);
    else if (sub == "verify-appendix") res = run_verify_appendix(cfg);
    else if (sub == "kernel-probe") res = run_kernel_probe(cfg);
    else throw std::invalid_argument("unknown subcommand " + sub);
    write_run_json(res, cfg, (std::filesystem::path(cfg.output_dir) / "report.json").string());
    return res;
}

}  // namespace cornerflow
