#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "kernel.hpp"
#include "report.hpp"
#include "vorticity.hpp"

namespace cornerflow {

struct BlowUpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Scheme { rk4, rk2 };

struct IntegratorControls {
    double dt_max = 0.01;
    double cfl_fraction = 0.5;
    Scheme scheme = Scheme::rk4;
    /// guard on Im Y; any clamp is counted in the trace
    double floor_im = 1e-14;
    double blowup_bound = 1e6;
    /// output grid: anchor * 2^-k for k = levels..1, then `linear_samples` evenly spaced up to T
    int geometric_levels = 8;
    double geometric_anchor = 0.0;
    int linear_samples = 16;
    bool record_all_steps = false;
};

struct FlowTrace {
    double nu = 0.75;
    std::size_t n_active = 0;
    std::vector<double> circulations;
    std::vector<double> times;
    std::vector<std::size_t> step_index;
    std::vector<std::vector<cplx>> positions;
    std::vector<std::vector<cplx>> positions_h;
    std::vector<cplx> probe_points;
    std::vector<std::vector<cplx>> b_corner_series;
    std::size_t clamp_events = 0;
    std::size_t steps = 0;
    std::vector<std::string> warnings;

    std::size_t n_particles() const { return positions.empty() ? 0 : positions.front().size(); }
    std::size_t n_tracers() const { return n_particles() - n_active; }
    double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

/// Probe points on a log-polar grid in the closed wedge, radii from r_max down to r_max * 10^-decades.
inline std::vector<cplx> corner_probe_points(double nu, double r_max, int n_radii = 25, int n_angles = 9,
                                             double decades = 3.0) {
    std::vector<cplx> pts;
    for (int a = 0; a < n_radii; ++a) {
        double r = r_max * std::pow(10.0, -decades * a / std::max(1, n_radii - 1));
        for (int b = 0; b < n_angles; ++b) pts.push_back(std::polar(r, nu * pi * b / std::max(1, n_angles - 1)));
    }
    return pts;
}

/// Passive tracers on a log-polar grid in the bisector half near the corner (wall excluded, bisector included).
inline std::vector<cplx> corner_tracers(double nu, double r_max, int n_radii = 12, int n_angles = 6,
                                        double decades = 2.0) {
    std::vector<cplx> pts;
    for (int a = 0; a < n_radii; ++a) {
        double r = r_max * std::pow(10.0, -decades * a / std::max(1, n_radii - 1));
        for (int b = 1; b <= n_angles; ++b) pts.push_back(std::polar(r, 0.5 * nu * pi * b / n_angles));
    }
    return pts;
}

inline std::vector<double> output_times(double T, const IntegratorControls& c) {
    std::vector<double> ts{0.0};
    double anchor = c.geometric_anchor > 0 ? std::min(c.geometric_anchor, T) : T;
    for (int k = c.geometric_levels; k >= 1; --k) ts.push_back(anchor * std::ldexp(1.0, -k));
    ts.push_back(anchor);
    if (anchor < T)
        for (int j = 1; j <= std::max(1, c.linear_samples); ++j)
            ts.push_back(anchor + (T - anchor) * j / std::max(1, c.linear_samples));
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

namespace detail {

/// Half-plane right-hand side (1/nu^2) b(Y) |Y|^{2-2nu}; the first n_active entries are the vortices.
struct HalfPlaneRhs {
    double nu;
    std::size_t n_active;
    std::vector<double> gamma;
    double delta;
    unsigned threads;

    void operator()(const std::vector<cplx>& y, std::vector<cplx>& f, std::vector<cplx>* b_out = nullptr) const {
        SourceSet s;
        s.x.resize(n_active);
        s.y.resize(n_active);
        for (std::size_t j = 0; j < n_active; ++j) {
            s.x[j] = y[j].real();
            s.y[j] = y[j].imag();
        }
        s.gamma = gamma;
        f.resize(y.size());
        if (b_out) b_out->resize(y.size());
        const double inv_nu2 = 1.0 / (nu * nu);
        parallel_for(y.size(), threads, [&](std::size_t i) {
            cplx b = I / (2 * pi) * bracket_sum(y[i], s, delta, i < n_active ? i : SIZE_MAX);
            f[i] = inv_nu2 * b * std::pow(std::norm(y[i]), 1.0 - nu);
            if (b_out) (*b_out)[i] = b;
        });
    }
};

inline void axpy(std::vector<cplx>& out, const std::vector<cplx>& y, double a, const std::vector<cplx>& k) {
    out.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
}

/// One explicit step from y given k1 = rhs(y).
inline std::vector<cplx> rk_advance(const HalfPlaneRhs& rhs, const std::vector<cplx>& y, const std::vector<cplx>& k1,
                                    double dt, Scheme scheme) {
    std::vector<cplx> tmp, k2, k3, k4, out(y.size());
    if (scheme == Scheme::rk2) {
        axpy(tmp, y, 0.5 * dt, k1);
        rhs(tmp, k2);
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + dt * k2[i];
        return out;
    }
    axpy(tmp, y, 0.5 * dt, k1);
    rhs(tmp, k2);
    axpy(tmp, y, 0.5 * dt, k2);
    rhs(tmp, k3);
    axpy(tmp, y, dt, k3);
    rhs(tmp, k4);
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

inline std::size_t apply_guards(std::vector<cplx>& y, const IntegratorControls& c) {
    std::size_t clamps = 0;
    for (cplx& v : y) {
        if (!(std::abs(v) <= c.blowup_bound)) throw BlowUpError("particle left the configured bound |Y| <= " + std::to_string(c.blowup_bound));
        if (v.imag() < c.floor_im) {
            v.imag(c.floor_im);
            ++clamps;
        }
    }
    return clamps;
}

inline void require_unsmoothed(const WedgeParams& p) {
    if (p.smoothed()) throw DomainError("particle flow is defined on the unsmoothed wedge (eps = 0)");
}

}  // namespace detail

/// One explicit Runge-Kutta step of all vortices in half-plane coordinates.
inline VortexEnsemble step(const VortexEnsemble& ens, double dt, const WedgeParams& p, const KernelConfig& k,
                           const IntegratorControls& c = {}) {
    if (!(dt > 0)) throw std::invalid_argument("step: dt must be positive");
    detail::require_unsmoothed(p);
    detail::HalfPlaneRhs rhs{p.nu(), ens.size(), ens.circulations, k.blob_delta, resolve_threads(k.threads)};
    std::vector<cplx> k1;
    rhs(ens.positions_h, k1);
    auto y = detail::rk_advance(rhs, ens.positions_h, k1, dt, c.scheme);
    if (std::size_t n = detail::apply_guards(y, c); n > 0)
        std::fprintf(stderr, "cornerflow: step clamped %zu particles to Im Y = %g\n", n, c.floor_im);
    VortexEnsemble out = ens;
    for (std::size_t i = 0; i < y.size(); ++i) {
        out.positions_h[i] = y[i];
        out.positions_omega[i] = map_from_halfplane(y[i], p);
    }
    return out;
}

/// Integrates vortices plus passive tracers to time T, recording at the output grid.
inline FlowTrace integrate(const VortexEnsemble& ens, double T, const IntegratorControls& c, const WedgeParams& p,
                           const KernelConfig& k, const std::vector<cplx>& tracers = {},
                           const std::vector<cplx>& probes = {}) {
    if (!(T > 0)) throw std::invalid_argument("integrate: T must be positive");
    if (!(c.dt_max > 0)) throw std::invalid_argument("integrate: dt_max must be positive");
    detail::require_unsmoothed(p);
    const double nu = p.nu();
    const unsigned threads = resolve_threads(k.threads);

    FlowTrace tr;
    tr.nu = nu;
    tr.n_active = ens.size();
    tr.circulations = ens.circulations;
    tr.probe_points = probes;

    std::vector<cplx> y = ens.positions_h;
    for (cplx x : tracers) y.push_back(map_to_halfplane(x, p));

    std::vector<cplx> probe_h;
    for (cplx z : probes) probe_h.push_back(map_to_halfplane(z, p));
    SourceSet probe_sources;

    auto record = [&](double t) {
        tr.times.push_back(t);
        tr.step_index.push_back(tr.steps);
        tr.positions_h.push_back(y);
        std::vector<cplx> x(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) x[i] = map_from_halfplane(y[i], p);
        tr.positions.push_back(std::move(x));
        if (!probes.empty()) {
            std::vector<cplx> src(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(ens.size()));
            auto b = b_tilde_field(SourceSet::from_points(src, ens.circulations), probe_h, k.blob_delta, false, threads);
            tr.b_corner_series.push_back(std::move(b));
        }
    };

    detail::HalfPlaneRhs rhs{nu, ens.size(), ens.circulations, k.blob_delta, threads};
    const auto outs = output_times(T, c);
    record(0.0);
    double t = 0.0;
    std::vector<cplx> k1, b;
    for (std::size_t next = 1; next < outs.size();) {
        rhs(y, k1, &b);
        double umax = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) umax = std::max(umax, std::abs(b[i]) * std::pow(std::abs(y[i]), 1.0 - nu) / nu);
        double dt = c.dt_max;
        if (ens.cell_size > 0 && umax > 0) dt = std::min(dt, c.cfl_fraction * ens.cell_size / umax);
        double remaining = outs[next] - t;
        bool land = remaining <= dt * (1.0 + 1e-9);
        if (land) dt = remaining;
        y = detail::rk_advance(rhs, y, k1, dt, c.scheme);
        ++tr.steps;
        if (std::size_t n = detail::apply_guards(y, c); n > 0) {
            tr.clamp_events += n;
            tr.warnings.push_back("t=" + std::to_string(t + dt) + ": clamped " + std::to_string(n) + " particles to Im Y floor");
        }
        t = land ? outs[next] : t + dt;
        if (land) {
            record(t);
            ++next;
        } else if (c.record_all_steps) {
            record(t);
        }
    }
    return tr;
}

/// Corner window over which the sampled b stays within eps of b0.
struct CornerWindow {
    double b0 = 0.0;
    double eps = 0.0;
    double R = 0.0;
    double T_window = 0.0;
    bool nonempty() const { return R > 0 && T_window > 0; }
};

/// Largest sampled window: R maximal among radii whose window reaches min_window, then T maximal for that R.
inline CornerWindow corner_probe(const FlowTrace& tr, double b0, double eps, double min_window = 0.0) {
    if (!(eps > 0 && eps < std::min(b0, 1.0))) throw std::invalid_argument("corner_probe: need 0 < eps < min(b0, 1)");
    if (tr.b_corner_series.empty()) throw std::invalid_argument("corner_probe: trace has no corner samples");
    std::vector<double> radii;
    for (cplx z : tr.probe_points) radii.push_back(std::abs(z));
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

    auto window_for = [&](double rad) {
        double last_ok = -1.0;
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const auto& bk = tr.b_corner_series[k];
            for (std::size_t q = 0; q < tr.probe_points.size(); ++q)
                if (std::abs(tr.probe_points[q]) <= rad && !(std::abs(bk[q] - b0) < eps)) return last_ok;
            last_ok = tr.times[k];
        }
        return last_ok;
    };

    CornerWindow w{b0, eps, 0.0, 0.0};
    for (double rad : radii) {
        double T = window_for(rad);
        if (T > 0 && T >= min_window) {
            w.R = 0.5 * rad;
            w.T_window = T;
        }
    }
    return w;
}

inline CornerWindow corner_probe(const FlowTrace& tr, const InitialVorticity& w0, double eps, double min_window = 0.0) {
    return corner_probe(tr, b_zero(w0, tr.nu), eps, min_window);
}

/// Radius lower bound [(2nu-1)(b0-eps) t / nu^2]^{nu/(2nu-1)}.
inline double corner_lower_bound(double t, double b0, double eps, double nu) {
    double base = (2 * nu - 1) * (b0 - eps) * t / (nu * nu);
    return base <= 0 ? 0.0 : std::pow(base, nu / (2 * nu - 1));
}

namespace detail {

inline bool starts_in_half_wedge(cplx x0, double nu, double R) {
    if (x0 == cplx{} || std::abs(x0) >= R) return false;
    double th = std::arg(x0);
    return th >= 0.0 && th <= 0.5 * nu * pi + 1e-12;
}

}  // namespace detail

inline BoundCheckReport trajectory_lower_bound_check(const FlowTrace& tr, double b0, double eps, double R, double T_window,
                                                     double nu, double tol = 0.05, double angle_slack = 1e-8) {
    if (!(eps > 0 && eps < std::min(b0, 1.0)))
        throw std::invalid_argument("trajectory_lower_bound_check: need 0 < eps < min(b0, 1)");
    BoundCheckReport rep;
    rep.check_name = "trajectory_lower_bound_check";
    rep.params = {{"b0", b0}, {"eps", eps}, {"R", R}, {"T_window", T_window}, {"nu", nu}, {"tol", tol}};
    std::vector<double> ratios;
    std::size_t tracked = 0, left_half = 0, below = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.n_particles(); ++i) {
        if (!detail::starts_in_half_wedge(tr.positions[0][i], nu, R)) continue;
        ++tracked;
        for (std::size_t k = 1; k < tr.times.size() && tr.times[k] <= T_window; ++k) {
            cplx x = tr.positions[k][i];
            double th = arg_2pi(x);
            if (th > pi + 1.0) th -= 2 * pi;
            if (th < -angle_slack || th > 0.5 * nu * pi + angle_slack) ++left_half;
            double bound = corner_lower_bound(tr.times[k], b0, eps, nu);
            double r = std::abs(x);
            double ratio = bound / r;
            ratios.push_back(ratio);
            min_margin = std::min(min_margin, r / bound);
            if (r < (1 - tol) * bound) ++below;
        }
    }
    auto st = ratio_stats(ratios);
    rep.n_samples = ratios.size();
    rep.max_ratio = st.max;
    rep.q99_ratio = st.q99;
    rep.fitted_constant = st.max;
    rep.fitted_constants["tracked_particles"] = static_cast<double>(tracked);
    rep.fitted_constants["left_half_wedge"] = static_cast<double>(left_half);
    rep.fitted_constants["below_bound"] = static_cast<double>(below);
    rep.fitted_constants["min_radius_over_bound"] = min_margin;
    rep.violations = left_half + below;
    if (rep.n_samples == 0) rep.notes.push_back("no tracked particle inside the measured window");
    rep.settle(rep.n_samples > 0);
    return rep;
}

inline BoundCheckReport right_motion_check(const FlowTrace& tr, double R_star, double T_window, double slack_per_step = 1e-12) {
    BoundCheckReport rep;
    rep.check_name = "right_motion_check";
    rep.params = {{"R_star", R_star}, {"T_window", T_window}, {"slack_per_step", slack_per_step}};
    std::size_t checked = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < tr.times.size() && tr.times[k + 1] <= T_window; ++k) {
        double slack = slack_per_step * static_cast<double>(tr.step_index[k + 1] - tr.step_index[k]);
        for (std::size_t i = 0; i < tr.n_particles(); ++i) {
            cplx y = tr.positions_h[k][i];
            if (!(y.real() > 0 && std::abs(y) < R_star)) continue;
            ++checked;
            double drop = y.real() - tr.positions_h[k + 1][i].real();
            worst = std::max(worst, drop);
            if (drop > slack) ++rep.violations;
        }
    }
    rep.n_samples = checked;
    rep.max_ratio = worst;
    rep.q99_ratio = worst;
    rep.fitted_constant = worst;
    rep.fitted_constants["largest_leftward_step"] = worst;
    rep.settle();
    return rep;
}

/// Sandwich fit of Im Y(t) against powers Im Y(0)^{e^{+-ct}}, and the same for the wedge-boundary distance.
struct SandwichFit {
    double c = 0.0;
    double C1 = 1.0, C2 = 1.0;
    double C3 = 1.0, C4 = 1.0;
};

namespace detail {

struct SandwichSample {
    double t, a, y, d0, d;
};

inline SandwichFit fit_constants(const std::vector<SandwichSample>& s, double c, double nu) {
    SandwichFit f;
    f.c = c;
    f.C1 = f.C3 = std::numeric_limits<double>::infinity();
    f.C2 = f.C4 = 0.0;
    for (const auto& q : s) {
        double up = std::exp(c * q.t), dn = std::exp(-c * q.t);
        f.C1 = std::min(f.C1, q.y / std::pow(q.a, up));
        f.C2 = std::max(f.C2, q.y / std::pow(q.a, dn));
        f.C3 = std::min(f.C3, q.d / std::pow(q.d0, up / nu));
        f.C4 = std::max(f.C4, q.d / std::pow(q.d0, nu * dn));
    }
    if (s.empty()) f.C1 = f.C2 = f.C3 = f.C4 = 1.0;
    return f;
}

/// Smallest c whose Im-sandwich constants fit inside [1/cap, cap]; infinity if none below c_max.
inline double smallest_rate(const std::vector<SandwichSample>& s, double nu, double cap, double c_max = 1e3) {
    auto ok = [&](double c) {
        auto f = fit_constants(s, c, nu);
        return f.C1 >= 1.0 / cap && f.C2 <= cap;
    };
    if (ok(0.0)) return 0.0;
    if (!ok(c_max)) return std::numeric_limits<double>::infinity();
    double lo = 0.0, hi = c_max;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace detail

inline BoundCheckReport distance_bound_check(const FlowTrace& tr, double c_rate, double T_max = -1.0) {
    if (!(c_rate > 0)) throw std::invalid_argument("distance_bound_check: c_rate must be positive");
    const double nu = tr.nu, opening = nu * pi;
    BoundCheckReport rep;
    rep.check_name = "distance_bound_check";
    rep.params = {{"c_rate", c_rate}, {"T_max", T_max}, {"nu", nu}};
    std::vector<detail::SandwichSample> all, even, odd, coarse;
    double ymax = 0.0;
    std::size_t below_axis = 0;
    for (std::size_t k = 1; k < tr.times.size(); ++k) {
        double t = tr.times[k];
        if (T_max > 0 && t > T_max) break;
        for (std::size_t i = 0; i < tr.n_particles(); ++i) {
            detail::SandwichSample q{t, tr.positions_h[0][i].imag(), tr.positions_h[k][i].imag(),
                                     distance_to_wedge_boundary(tr.positions[0][i], opening),
                                     distance_to_wedge_boundary(tr.positions[k][i], opening)};
            if (!(q.y > 0)) ++below_axis;
            ymax = std::max(ymax, q.y);
            all.push_back(q);
            (i % 2 == 0 ? even : odd).push_back(q);
            if (k % 2 == 0) coarse.push_back(q);
        }
    }
    const double cap = std::exp(1.0) * (ymax + 1.0);
    double c_fit = detail::smallest_rate(all, nu, cap);
    auto f = detail::fit_constants(all, c_rate, nu);
    auto fe = detail::fit_constants(even, c_rate, nu), fo = detail::fit_constants(odd, c_rate, nu);
    auto fc = detail::fit_constants(coarse, c_rate, nu);
    double stab = std::max({stability(fe.C2, fo.C2), stability(1 / fe.C1, 1 / fo.C1), stability(f.C2, fc.C2),
                            stability(1 / f.C1, 1 / fc.C1)});
    rep.n_samples = all.size();
    rep.max_ratio = std::max(f.C2, 1.0 / f.C1);
    rep.q99_ratio = rep.max_ratio;
    rep.fitted_constant = c_fit;
    rep.stability_factor = stab;
    rep.fitted_constants = {{"c_fit", c_fit}, {"constant_cap", cap}, {"C1", f.C1}, {"C2", f.C2},
                            {"C3", f.C3}, {"C4", f.C4}, {"min_im_y_nonpositive", static_cast<double>(below_axis)}};
    rep.violations = below_axis + tr.clamp_events;
    bool finite = std::isfinite(c_fit) && f.C1 > 0 && std::isfinite(f.C2) && f.C3 > 0 && std::isfinite(f.C4);
    rep.settle(finite);
    return rep;
}

inline BoundCheckReport long_time_floor_check(const FlowTrace& tr, double T1, double T2, double floor = 1e-6) {
    if (!(T1 > 0 && T1 < T2 && T2 <= tr.horizon() * (1 + 1e-12)))
        throw std::invalid_argument("long_time_floor_check: need 0 < T1 < T2 <= horizon");
    BoundCheckReport rep;
    rep.check_name = "long_time_floor_check";
    rep.params = {{"T1", T1}, {"T2", T2}, {"floor", floor}};
    double m = std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        if (tr.times[k] < T1 || tr.times[k] > T2) continue;
        for (std::size_t i = 0; i < tr.n_particles(); ++i) {
            if (!detail::starts_in_half_wedge(tr.positions[0][i], tr.nu, std::numeric_limits<double>::infinity())) continue;
            m = std::min(m, std::abs(tr.positions[k][i]));
            ++n;
        }
    }
    rep.n_samples = n;
    rep.fitted_constant = m;
    rep.max_ratio = n > 0 ? floor / m : std::numeric_limits<double>::infinity();
    rep.q99_ratio = rep.max_ratio;
    rep.fitted_constants["min_radius"] = m;
    rep.settle(n > 0 && m >= floor);
    return rep;
}

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// CSV with columns t, particle_id, re_x, im_x, re_y, im_y.
inline void write_trace_csv(const FlowTrace& tr, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,particle_id,re_x,im_x,re_y,im_y\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        std::string t = format_double(tr.times[k]);
        for (std::size_t i = 0; i < tr.n_particles(); ++i) {
            const cplx x = tr.positions[k][i], y = tr.positions_h[k][i];
            out << t << ',' << i << ',' << format_double(x.real()) << ',' << format_double(x.imag()) << ','
                << format_double(y.real()) << ',' << format_double(y.imag()) << '\n';
        }
    }
}

inline void write_reports_json(const std::vector<BoundCheckReport>& reps, const std::string& path) {
    json arr = json::array();
    for (const auto& r : reps) arr.push_back(to_json(r));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << arr.dump(2) << '\n';
}

}  // namespace cornerflow
