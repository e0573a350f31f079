#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "flow.hpp"
#include "report.hpp"
#include "summation.hpp"

namespace cornerflow {

struct MismatchedTraceError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct WindowViolationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Log-Lipschitz modulus x * max(-ln x, 1).
inline double phi(double x) {
    if (x < 0) throw DomainError("phi: negative argument");
    if (x == 0) return 0.0;
    return x * std::max(-std::log(x), 1.0);
}

struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> e1;
    double alpha = 0.0;
    std::vector<double> e_weighted;
};

/// Particles [offset, offset + count) of a trace.
struct ParticleSlice {
    std::size_t offset = 0;
    std::size_t count = 0;
};

inline EnergyTrace e1(const FlowTrace& a, const FlowTrace& b, const std::vector<double>& weights, ParticleSlice sa,
                      ParticleSlice sb, unsigned threads = 1) {
    if (a.times != b.times) throw MismatchedTraceError("e1: traces are sampled at different times");
    if (sa.count != weights.size() || sb.count != weights.size())
        throw MismatchedTraceError("e1: particle slices do not match the weights");
    if (sa.offset + sa.count > a.n_particles() || sb.offset + sb.count > b.n_particles())
        throw MismatchedTraceError("e1: particle slice out of range");
    EnergyTrace e;
    e.times = a.times;
    std::vector<double> terms(weights.size());
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        for (std::size_t i = 0; i < weights.size(); ++i)
            terms[i] = std::abs(a.positions[k][sa.offset + i] - b.positions[k][sb.offset + i]) * std::abs(weights[i]);
        e.e1.push_back(deterministic_sum(terms, threads));
    }
    return e;
}

/// E1 over the vortices themselves, weighted by |circulation|.
inline EnergyTrace e1(const FlowTrace& a, const FlowTrace& b, const VortexEnsemble& ens) {
    if (a.n_active != ens.size() || b.n_active != ens.size())
        throw MismatchedTraceError("e1: traces do not carry this ensemble's particles");
    return e1(a, b, ens.circulations, {0, ens.size()}, {0, ens.size()});
}

/// E1 over passive tracers seeded at the reference ensemble's positions.
inline EnergyTrace e1_tracers(const FlowTrace& a, const FlowTrace& b, const VortexEnsemble& reference) {
    if (a.n_tracers() != reference.size() || b.n_tracers() != reference.size())
        throw MismatchedTraceError("e1_tracers: tracer count differs from the reference ensemble");
    return e1(a, b, reference.circulations, {a.n_active, reference.size()}, {b.n_active, reference.size()});
}

inline EnergyTrace weighted_energy(EnergyTrace e, double alpha) {
    if (!(alpha > 0)) throw std::invalid_argument("weighted_energy: alpha must be positive");
    e.alpha = alpha;
    e.e_weighted.resize(e.times.size());
    for (std::size_t k = 0; k < e.times.size(); ++k) {
        double t = e.times[k];
        if (t > 0)
            e.e_weighted[k] = std::pow(t, -alpha) * e.e1[k];
        else
            e.e_weighted[k] = e.e1[k] == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return e;
}

/// CSV with columns t, e1, e_weighted, alpha.
inline void write_energy_csv(const EnergyTrace& e, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,e1,e_weighted,alpha\n";
    for (std::size_t k = 0; k < e.times.size(); ++k) {
        double w = k < e.e_weighted.size() ? e.e_weighted[k] : std::numeric_limits<double>::quiet_NaN();
        out << format_double(e.times[k]) << ',' << format_double(e.e1[k]) << ',' << format_double(w) << ','
            << format_double(e.alpha) << '\n';
    }
}

/// Slope of ln E1 against ln t on [t_lo, t_hi]; each sample weighted by its share of ln t, so every decade counts equally.
inline double e1_growth_fit(const std::vector<double>& times, const std::vector<double>& values, double t_lo, double t_hi) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < t_lo || times[k] > t_hi || times[k] <= 0) continue;
        if (!(values[k] > 0)) throw std::invalid_argument("e1_growth_fit: E1 must be positive on the window");
        lx.push_back(std::log(times[k]));
        ly.push_back(std::log(values[k]));
    }
    if (lx.size() < 2 || lx.back() == lx.front()) throw std::invalid_argument("e1_growth_fit: degenerate window");
    const std::size_t n = lx.size();
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        double left = k > 0 ? lx[k] - lx[k - 1] : 0.0, right = k + 1 < n ? lx[k + 1] - lx[k] : 0.0;
        w[k] = 0.5 * (left + right);
    }
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        sw += w[k];
        sx += w[k] * lx[k];
        sy += w[k] * ly[k];
    }
    double mx = sx / sw, my = sy / sw, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += w[k] * (lx[k] - mx) * (lx[k] - mx);
        sxy += w[k] * (lx[k] - mx) * (ly[k] - my);
    }
    return sxy / sxx;
}

inline double e1_growth_fit(const EnergyTrace& e, double t_lo, double t_hi) {
    return e1_growth_fit(e.times, e.e1, t_lo, t_hi);
}

struct RefinementLevel {
    double h = 0.0;
    double dt = 0.0;
    std::size_t n_particles = 0;
    std::size_t steps = 0;
    /// E1 at the horizon against the previous level; NaN on the coarsest level
    double e1_vs_previous = std::numeric_limits<double>::quiet_NaN();
};

struct RefinementStudy {
    std::vector<RefinementLevel> levels;
    /// E1 time series between the two finest levels
    EnergyTrace finest_pair;
    BoundCheckReport report;
};

/// Runs the ensemble at (h0, dt0), (h0/2, dt0/2), ... with fixed steps; passive tracers sit at the
/// coarsest cell centers so every level is compared on the same material points.
inline RefinementStudy self_convergence_study(const InitialVorticity& w0, const WedgeParams& p, double h0, double dt0,
                                              double T, int levels, double min_factor = 2.0, int n_outputs = 10,
                                              unsigned threads = 0, double delta_exponent = 0.9) {
    if (levels < 2) throw std::invalid_argument("self_convergence_study: need at least two levels");
    if (!(h0 > 0 && dt0 > 0 && T > 0 && n_outputs >= 1)) throw std::invalid_argument("self_convergence_study: bad step sizes");
    const double nu = p.nu();
    const VortexEnsemble ref = discretize(w0, h0, nu);
    IntegratorControls c;
    c.cfl_fraction = std::numeric_limits<double>::infinity();
    c.geometric_levels = 0;
    c.geometric_anchor = T / n_outputs;
    c.linear_samples = n_outputs - 1;

    RefinementStudy st;
    FlowTrace prev;
    std::vector<double> e1_final;
    for (int l = 0; l < levels; ++l) {
        RefinementLevel lv;
        lv.h = std::ldexp(h0, -l);
        lv.dt = std::ldexp(dt0, -l);
        auto ens = discretize(w0, lv.h, nu);
        c.dt_max = lv.dt;
        KernelConfig k{std::pow(lv.h, delta_exponent), true, threads};
        auto tr = integrate(ens, T, c, p, k, ref.positions_omega);
        lv.n_particles = ens.size();
        lv.steps = tr.steps;
        if (l > 0) {
            auto e = e1_tracers(prev, tr, ref);
            lv.e1_vs_previous = e.e1.back();
            e1_final.push_back(lv.e1_vs_previous);
            if (l == levels - 1) st.finest_pair = std::move(e);
        }
        st.levels.push_back(lv);
        prev = std::move(tr);
    }

    auto& r = st.report;
    r.check_name = "e1_self_convergence";
    r.params = {{"nu", nu}, {"h0", h0}, {"dt0", dt0}, {"T", T}, {"levels", levels}, {"min_factor", min_factor},
                {"delta_exponent", delta_exponent}};
    std::vector<double> shrink;
    for (std::size_t j = 0; j < e1_final.size(); ++j) {
        r.fitted_constants["e1_level_" + std::to_string(j + 1)] = e1_final[j];
        if (j == 0) continue;
        double f = e1_final[j] / e1_final[j - 1];
        shrink.push_back(f);
        r.fitted_constants["reduction_factor_" + std::to_string(j + 1)] = 1.0 / f;
        if (!(1.0 / f >= min_factor)) ++r.violations;
    }
    auto rs = ratio_stats(shrink);
    r.n_samples = shrink.size();
    r.max_ratio = rs.max;
    r.q99_ratio = rs.q99;
    r.fitted_constant = e1_final.empty() ? 0.0 : e1_final.back();
    if (shrink.empty()) r.notes.push_back("two levels give one E1 value and no reduction factor");
    r.settle(!shrink.empty());
    return st;
}

struct EnergyConstants {
    double p;
    double eps;
};

/// Exponent p and smallness eps for the weighted-energy contraction.
inline EnergyConstants choose_constants(double alpha, double nu, double b0) {
    const double q = 2 * nu - 1;
    if (!(nu > 0.5 && nu < 1.0)) throw std::invalid_argument("choose_constants: nu must lie in (1/2, 1)");
    if (!(alpha > 1 && alpha < 2 * nu / q)) throw std::invalid_argument("choose_constants: need 1 < alpha < 2 nu/(2 nu - 1)");
    if (!(b0 > 0)) throw std::invalid_argument("choose_constants: b0 must be positive");
    EnergyConstants c;
    c.p = alpha / (alpha - 1);
    c.eps = 0.5 * std::min({(2 * nu - alpha * q) / (2 * alpha * q), b0 * q / (3 - 2 * nu), 1.0});
    bool ok = c.p > 2 * nu && 2 / c.p < (1 + c.eps * (1 - 2 * nu)) / nu &&
              (b0 + c.eps) / (b0 - c.eps) < 1 / (2 * (1 - nu)) && c.eps < std::min(b0, 1.0);
    if (!ok) throw std::logic_error("choose_constants: derived constants violate their defining inequalities");
    return c;
}

/// x(t) = [((2nu-1)/nu)(t-t0)]^{nu/(2nu-1)} after the delay t0, zero before.
struct ModelOdeSolution {
    double nu;
    double t0 = 0.0;

    double operator()(double t) const {
        if (t <= t0) return 0.0;
        return std::pow((2 * nu - 1) / nu * (t - t0), nu / (2 * nu - 1));
    }
    double derivative(double t) const {
        if (t <= t0) return 0.0;
        return std::pow((*this)(t), 1 / nu - 1);
    }
};

struct ModelTrajectory {
    std::vector<double> times;
    std::vector<double> values;
};

/// Geometric grid from T*10^-decades to T with `per_decade` points per decade, plus t = 0.
inline std::vector<double> geometric_grid(double T, double decades = 6, int per_decade = 20) {
    std::vector<double> ts{0.0};
    int n = static_cast<int>(decades * per_decade);
    for (int k = n; k >= 0; --k) ts.push_back(T * std::pow(10.0, -static_cast<double>(k) / per_decade));
    return ts;
}

/// Adaptive Dormand-Prince integration of dx/dt = x^{1/nu - 1} from x(0) = x0 > 0.
inline ModelTrajectory model_ode_integrate(double nu, double x0, const std::vector<double>& times, double tol = 1e-12) {
    if (!(x0 > 0)) throw std::invalid_argument("model_ode_integrate: x0 must be positive");
    if (times.empty() || times.front() != 0.0) throw std::invalid_argument("model_ode_integrate: grid must start at 0");
    namespace odeint = boost::numeric::odeint;
    using state = std::vector<double>;
    const double expo = 1 / nu - 1;
    auto rhs = [expo](const state& x, state& dxdt, double) { dxdt[0] = std::pow(std::max(x[0], 0.0), expo); };
    state x{x0};
    ModelTrajectory tr;
    auto obs = [&](const state& s, double t) {
        tr.times.push_back(t);
        tr.values.push_back(s[0]);
    };
    double dt0 = std::max(1e-14, times.size() > 1 ? 1e-3 * times[1] : 1e-6);
    odeint::integrate_times(odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<state>()), rhs, x,
                            times.begin(), times.end(), dt0, obs);
    return tr;
}

inline ModelTrajectory model_ode_integrate(double nu, double x0, double T) {
    return model_ode_integrate(nu, x0, geometric_grid(T));
}

inline ModelTrajectory sample(const ModelOdeSolution& s, const std::vector<double>& times) {
    ModelTrajectory tr{times, {}};
    for (double t : times) tr.values.push_back(s(t));
    return tr;
}

struct ModelEnergyReport {
    BoundCheckReport step1, step2, step3;
    bool pass() const { return step1.pass && step2.pass && step3.pass; }
};

inline std::vector<BoundCheckReport> reports(const ModelEnergyReport& r) { return {r.step1, r.step2, r.step3}; }

/// Steps of the weighted-energy uniqueness argument on a pair of model trajectories.
/// Step 2 is also measured on the delayed-solution pair {t0 = 0, t0 = witness_delay},
/// the pair with coinciding initial data on which the growth exponent is sharp.
inline ModelEnergyReport model_energy_demo(double nu, double alpha, double eps, const ModelTrajectory& a,
                                           const ModelTrajectory& b, double witness_delay = 1.0) {
    const double q = 2 * nu - 1, expo = nu / q;
    if (!(nu > 0.5 && nu < 1 && eps > 0 && eps < 1)) throw std::invalid_argument("model_energy_demo: need 1/2 < nu < 1, 0 < eps < 1");
    if (!((1 - nu) / (q * (1 - eps)) <= alpha && alpha < expo))
        throw WindowViolationError("model_energy_demo: alpha outside [(1-nu)/((2nu-1)(1-eps)), nu/(2nu-1))");
    if (a.times != b.times) throw MismatchedTraceError("model_energy_demo: trajectories sampled on different grids");
    const auto& ts = a.times;
    json params = {{"nu", nu}, {"alpha", alpha}, {"eps", eps}};
    ModelEnergyReport rep;

    {
        auto& r = rep.step1;
        r.check_name = "model_step1_lower_bound";
        r.params = params;
        std::vector<double> ratios;
        for (std::size_t k = 1; k < ts.size(); ++k) {
            double lb = std::pow(q / nu * (1 - eps) * ts[k], expo);
            for (double x : {a.values[k], b.values[k]}) {
                ratios.push_back(lb / x);
                if (!(x >= lb)) ++r.violations;
            }
        }
        auto st = ratio_stats(ratios);
        r.n_samples = ratios.size();
        r.max_ratio = st.max;
        r.q99_ratio = st.q99;
        r.fitted_constant = st.max;
        r.settle();
    }

    std::vector<double> gap(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) gap[k] = std::abs(a.values[k] - b.values[k]);

    {
        // |x1^{1/nu-1} - x2^{1/nu-1}| <= |x1-x2|^{1/nu-1} integrates to this comparison bound
        auto& r = rep.step2;
        r.check_name = "model_step2_growth_bound";
        r.params = params;
        r.params["witness_delay"] = witness_delay;
        const double e0q = std::pow(gap[0], q / nu);
        std::vector<double> ratios;
        for (std::size_t k = 1; k < ts.size(); ++k) {
            double bound = std::pow(e0q + q / nu * ts[k], expo);
            ratios.push_back(gap[k] / bound);
            if (gap[k] > bound * (1 + 1e-9)) ++r.violations;
        }
        auto st = ratio_stats(ratios);
        r.n_samples = ratios.size();
        r.max_ratio = st.max;
        r.q99_ratio = st.q99;
        r.fitted_constant = st.max;

        ModelOdeSolution early{nu, 0.0}, late{nu, witness_delay};
        std::vector<double> wt, we;
        double c_witness = 0.0;
        for (double t : geometric_grid(witness_delay, 6, 20)) {
            if (t <= 0) continue;
            wt.push_back(t);
            we.push_back(std::abs(early(t) - late(t)));
            c_witness = std::max(c_witness, we.back() / std::pow(t, expo));
        }
        double slope = e1_growth_fit(wt, we, wt.front(), wt.back());
        bool pair_has_gap = gap[0] > 0 && ts.size() > 2;
        double pair_slope = pair_has_gap ? e1_growth_fit(ts, gap, ts[1], ts.back()) : std::numeric_limits<double>::quiet_NaN();
        r.fitted_constants = {{"witness_slope", slope}, {"witness_constant", c_witness}, {"pair_slope", pair_slope},
                              {"exponent", expo}};
        r.settle(std::isfinite(c_witness) && slope <= expo + 1e-6);
    }

    {
        auto& r = rep.step3;
        r.check_name = "model_step3_weighted_monotone";
        r.params = params;
        std::vector<double> E;
        for (std::size_t k = 1; k < ts.size(); ++k) E.push_back(std::pow(ts[k], -alpha) * gap[k]);
        double emax = 0.0;
        for (double v : E) emax = std::max(emax, v);
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < E.size(); ++k) {
            double inc = E[k + 1] - E[k];
            worst = std::max(worst, inc);
            if (inc > 1e-10 * emax) ++r.violations;
        }
        r.n_samples = E.size();
        r.max_ratio = emax > 0 ? worst / emax : 0.0;
        r.q99_ratio = r.max_ratio;
        r.fitted_constant = emax;
        r.fitted_constants["largest_increment"] = worst;
        r.settle();
    }
    return rep;
}

}  // namespace cornerflow
