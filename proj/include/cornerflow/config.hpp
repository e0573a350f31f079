#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "flow.hpp"
#include "geometry.hpp"
#include "report.hpp"
#include "vorticity.hpp"

namespace cornerflow {

/// Parse or validation failure; `line` is 0 when the offending key is absent from the file.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& source, std::size_t line, const std::string& field, const std::string& msg)
        : std::runtime_error(describe(source, line, field, msg)), line(line), field(field) {}

    std::size_t line;
    std::string field;

private:
    static std::string describe(const std::string& source, std::size_t line, const std::string& field,
                                const std::string& msg) {
        std::string s = source;
        if (line > 0) s += ":" + std::to_string(line);
        if (!field.empty()) s += ": " + field;
        return s + ": " + msg;
    }
};

struct VorticityConfig {
    std::string kind = "annular_sector";
    double amplitude = 1.0;
    double r_inner = 0.1, r_outer = 0.5;
    /// negative means: the bisector nu*pi/2
    double theta_lo = 0.0, theta_hi = -1.0;
    double center_re = 0.35, center_im = 0.15, sigma = 0.03, cutoff = 4.0;
};

struct FlowCheckConfig {
    /// corner tolerance as a fraction of b0
    double eps_fraction = 0.5;
    double min_window = 0.0;
    double lower_bound_tol = 0.05;
    double angle_slack = 1e-8;
    double right_motion_slack = 1e-12;
    double c_rate = 1.0;
    double floor_t1 = 0.5, floor_t2 = 2.0, floor = 1e-6;
    double probe_radius = 0.4;
    double tracer_radius = 0.2;
};

struct EnergyConfig {
    double nu = 0.75;
    double alpha = 1.0;
    double eps = 0.1;
    double x0_a = 1e-8, x0_b = 2e-8;
    double T = 1.0;
    double witness_delay = 1.0;
    double e1_alpha = 1.0;
    double h0 = 0.04, dt0 = 0.02;
    double e1_T = 1.0;
    int levels = 3;
    double min_factor = 2.0;
    int n_outputs = 10;
};

struct AppendixConfig {
    std::vector<double> nu_values{0.55, 0.75, 0.9};
    int itwo_configs = 12;
    int ithree_configs = 10;
    int powers_samples = 20000;
    int iest_scales = 8;
    bool negative_controls = false;
};

struct ProbeConfig {
    std::size_t n_pairs = 10000;
    std::vector<double> eps_values{0.0, 0.5};
};

struct ExperimentConfig {
    double nu = 0.75;
    double eps = 0.0;
    VorticityConfig vorticity;
    double h = 0.01;
    /// negative means: h^0.9
    double blob_delta = -1.0;
    IntegratorControls integrator{.dt_max = 0.02, .geometric_anchor = 0.5, .linear_samples = 30};
    double T = 2.0;
    std::string output_dir = "out";
    std::set<std::string> checks;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    FlowCheckConfig flow;
    EnergyConfig energy;
    AppendixConfig appendix;
    ProbeConfig probe;

    WedgeParams wedge() const { return WedgeParams(nu, eps); }
    double delta() const { return blob_delta >= 0 ? blob_delta : std::pow(h, 0.9); }
    bool selected(const std::string& name) const { return checks.empty() || checks.count(name) > 0; }

    InitialVorticity initial_vorticity() const {
        const auto& v = vorticity;
        if (v.kind == "gaussian") return TruncatedGaussian{{v.center_re, v.center_im}, v.sigma, v.cutoff, v.amplitude};
        double hi = v.theta_hi < 0 ? 0.5 * nu * pi : v.theta_hi;
        return AnnularSector{v.r_inner, v.r_outer, v.theta_lo, hi, v.amplitude};
    }
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {
        std::istringstream in(text_);
        try {
            boost::property_tree::ini_parser::read_ini(in, tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(source_, e.line(), "", e.message());
        }
    }

    template <class T>
    void get(const std::string& section, const std::string& key, T& out) {
        seen_.insert(section + "." + key);
        auto node = tree_.get_child_optional(boost::property_tree::ptree::path_type(section + "." + key, '.'));
        if (!node) return;
        std::string raw = boost::algorithm::trim_copy(node->data());
        try {
            out = convert(raw, out);
        } catch (const std::exception&) {
            fail(section, key, "cannot parse '" + raw + "'");
        }
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const {
        throw ConfigError(source_, line_of(section, key), section + "." + key, msg);
    }

    /// Every key in the file must have been requested by get().
    void reject_unknown() const {
        for (const auto& [sec, body] : tree_) {
            if (body.empty()) throw ConfigError(source_, line_of("", sec), sec, "key outside any section");
            for (const auto& [key, v] : body)
                if (!seen_.count(sec + "." + key)) throw ConfigError(source_, line_of(sec, key), sec + "." + key, "unknown key");
        }
    }

    std::size_t line_of(const std::string& section, const std::string& key) const {
        std::istringstream in(text_);
        std::string line, current;
        for (std::size_t n = 1; std::getline(in, line); ++n) {
            auto t = boost::algorithm::trim_copy(line);
            if (t.empty() || t[0] == ';' || t[0] == '#') continue;
            if (t.front() == '[' && t.back() == ']') {
                current = boost::algorithm::trim_copy(t.substr(1, t.size() - 2));
                continue;
            }
            auto eq = t.find('=');
            if (eq != std::string::npos && current == section && boost::algorithm::trim_copy(t.substr(0, eq)) == key) return n;
        }
        return 0;
    }

private:
    static double convert(const std::string& s, double) {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    }
    static int convert(const std::string& s, int) {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    }
    static unsigned convert(const std::string& s, unsigned) {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
        std::size_t used = 0;
        unsigned long v = std::stoul(s, &used);
        if (used != s.size() || v > 4096) throw std::invalid_argument("out of range");
        return static_cast<unsigned>(v);
    }
    static std::size_t convert(const std::string& s, std::size_t) {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
        std::size_t used = 0;
        auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::size_t>(v);
    }
    static bool convert(const std::string& s, bool) {
        auto l = boost::algorithm::to_lower_copy(s);
        if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
        if (l == "false" || l == "0" || l == "no" || l == "off") return false;
        throw std::invalid_argument("not a boolean");
    }
    static std::string convert(const std::string& s, const std::string&) { return s; }
    static std::vector<double> convert(const std::string& s, const std::vector<double>&) {
        std::vector<std::string> parts;
        boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
        std::vector<double> out;
        for (auto& p : parts) out.push_back(convert(boost::algorithm::trim_copy(p), 0.0));
        return out;
    }
    static std::set<std::string> convert(const std::string& s, const std::set<std::string>&) {
        std::vector<std::string> parts;
        boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
        std::set<std::string> out;
        for (auto& p : parts) {
            auto t = boost::algorithm::trim_copy(p);
            if (!t.empty() && t != "all") out.insert(t);
        }
        return out;
    }
    static Scheme convert(const std::string& s, Scheme) {
        if (s == "rk4") return Scheme::rk4;
        if (s == "rk2") return Scheme::rk2;
        throw std::invalid_argument("scheme must be rk4 or rk2");
    }

    std::string text_;
    std::string source_;
    boost::property_tree::ptree tree_;
    std::set<std::string> seen_;
};

}  // namespace detail

/// Parses the INI text; `known_checks` (when nonempty) restricts [run] checks.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>",
                                     const std::set<std::string>& known_checks = {}) {
    detail::ConfigReader r(text, source);
    ExperimentConfig c;
    r.get("wedge", "nu", c.nu);
    r.get("wedge", "eps", c.eps);

    auto& v = c.vorticity;
    r.get("vorticity", "kind", v.kind);
    r.get("vorticity", "amplitude", v.amplitude);
    r.get("vorticity", "r_inner", v.r_inner);
    r.get("vorticity", "r_outer", v.r_outer);
    r.get("vorticity", "theta_lo", v.theta_lo);
    r.get("vorticity", "theta_hi", v.theta_hi);
    r.get("vorticity", "center_re", v.center_re);
    r.get("vorticity", "center_im", v.center_im);
    r.get("vorticity", "sigma", v.sigma);
    r.get("vorticity", "cutoff", v.cutoff);

    r.get("discretization", "h", c.h);
    r.get("discretization", "blob_delta", c.blob_delta);

    auto& ic = c.integrator;
    r.get("integrator", "T", c.T);
    r.get("integrator", "dt_max", ic.dt_max);
    r.get("integrator", "cfl_fraction", ic.cfl_fraction);
    r.get("integrator", "scheme", ic.scheme);
    r.get("integrator", "floor_im", ic.floor_im);
    r.get("integrator", "blowup_bound", ic.blowup_bound);
    r.get("integrator", "geometric_levels", ic.geometric_levels);
    r.get("integrator", "geometric_anchor", ic.geometric_anchor);
    r.get("integrator", "linear_samples", ic.linear_samples);

    auto& f = c.flow;
    r.get("flow", "eps_fraction", f.eps_fraction);
    r.get("flow", "min_window", f.min_window);
    r.get("flow", "lower_bound_tol", f.lower_bound_tol);
    r.get("flow", "angle_slack", f.angle_slack);
    r.get("flow", "right_motion_slack", f.right_motion_slack);
    r.get("flow", "c_rate", f.c_rate);
    r.get("flow", "floor_t1", f.floor_t1);
    r.get("flow", "floor_t2", f.floor_t2);
    r.get("flow", "floor", f.floor);
    r.get("flow", "probe_radius", f.probe_radius);
    r.get("flow", "tracer_radius", f.tracer_radius);

    auto& e = c.energy;
    r.get("energy", "nu", e.nu);
    r.get("energy", "alpha", e.alpha);
    r.get("energy", "eps", e.eps);
    r.get("energy", "x0_a", e.x0_a);
    r.get("energy", "x0_b", e.x0_b);
    r.get("energy", "T", e.T);
    r.get("energy", "witness_delay", e.witness_delay);
    r.get("energy", "e1_alpha", e.e1_alpha);
    r.get("energy", "h0", e.h0);
    r.get("energy", "dt0", e.dt0);
    r.get("energy", "e1_T", e.e1_T);
    r.get("energy", "levels", e.levels);
    r.get("energy", "min_factor", e.min_factor);
    r.get("energy", "n_outputs", e.n_outputs);

    auto& a = c.appendix;
    r.get("appendix", "nu_values", a.nu_values);
    r.get("appendix", "itwo_configs", a.itwo_configs);
    r.get("appendix", "ithree_configs", a.ithree_configs);
    r.get("appendix", "powers_samples", a.powers_samples);
    r.get("appendix", "iest_scales", a.iest_scales);
    r.get("appendix", "negative_controls", a.negative_controls);

    r.get("kernel_probe", "n_pairs", c.probe.n_pairs);
    r.get("kernel_probe", "eps_values", c.probe.eps_values);

    r.get("run", "output_dir", c.output_dir);
    r.get("run", "checks", c.checks);
    r.get("run", "seed", c.seed);
    r.get("run", "threads", c.threads);
    r.reject_unknown();

    auto need = [&](bool ok, const char* sec, const char* key, const std::string& msg) {
        if (!ok) r.fail(sec, key, msg);
    };
    need(c.nu > 0.5 && c.nu < 1.0, "wedge", "nu", "must lie in (1/2, 1)");
    need(c.eps >= 0 && c.eps <= 1, "wedge", "eps", "must lie in [0, 1]");
    need(v.kind == "annular_sector" || v.kind == "gaussian", "vorticity", "kind", "must be annular_sector or gaussian");
    need(v.amplitude >= 0, "vorticity", "amplitude", "vorticity must be nonnegative");
    try {
        auto w0 = c.initial_vorticity();
        auto rep = validate_assumptions(w0, c.nu, 100);
        if (!rep.pass()) r.fail("vorticity", "kind", rep.violations.front());
    } catch (const std::invalid_argument& ex) {
        r.fail("vorticity", "kind", ex.what());
    }
    need(c.h > 0 && c.h < 1, "discretization", "h", "must lie in (0, 1)");
    need(c.blob_delta < 0 || std::isfinite(c.blob_delta), "discretization", "blob_delta", "must be finite");
    need(c.T > 0 && std::isfinite(c.T), "integrator", "T", "must be positive");
    need(ic.dt_max > 0, "integrator", "dt_max", "must be positive");
    need(ic.cfl_fraction > 0, "integrator", "cfl_fraction", "must be positive");
    need(ic.floor_im > 0, "integrator", "floor_im", "must be positive");
    need(ic.geometric_levels >= 0 && ic.geometric_levels <= 60, "integrator", "geometric_levels", "must lie in [0, 60]");
    need(ic.linear_samples >= 1, "integrator", "linear_samples", "must be at least 1");
    need(f.eps_fraction > 0 && f.eps_fraction < 1, "flow", "eps_fraction", "must lie in (0, 1)");
    need(f.lower_bound_tol >= 0 && f.lower_bound_tol < 1, "flow", "lower_bound_tol", "must lie in [0, 1)");
    need(f.c_rate > 0, "flow", "c_rate", "must be positive");
    need(f.floor_t1 > 0 && f.floor_t1 < f.floor_t2, "flow", "floor_t1", "need 0 < floor_t1 < floor_t2");
    need(f.floor_t2 <= c.T, "flow", "floor_t2", "must not exceed the horizon [integrator] T");
    need(f.floor > 0, "flow", "floor", "must be positive");
    need(f.probe_radius > 0 && f.tracer_radius > 0, "flow", "probe_radius", "probe and tracer radii must be positive");
    need(e.nu > 0.5 && e.nu < 1.0, "energy", "nu", "must lie in (1/2, 1)");
    need(e.eps > 0 && e.eps < 1, "energy", "eps", "must lie in (0, 1)");
    {
        double q = 2 * e.nu - 1;
        need((1 - e.nu) / (q * (1 - e.eps)) <= e.alpha && e.alpha < e.nu / q, "energy", "alpha",
             "must lie in [(1-nu)/((2nu-1)(1-eps)), nu/(2nu-1))");
    }
    need(e.x0_a > 0 && e.x0_b > 0, "energy", "x0_a", "initial data must be positive");
    need(e.T > 0 && e.witness_delay > 0, "energy", "T", "T and witness_delay must be positive");
    need(e.e1_alpha > 0, "energy", "e1_alpha", "must be positive");
    need(e.h0 > 0 && e.dt0 > 0, "energy", "h0", "h0 and dt0 must be positive");
    need(e.e1_T > 0, "energy", "e1_T", "must be positive");
    need(e.levels >= 2 && e.levels <= 6, "energy", "levels", "must lie in [2, 6]");
    need(e.n_outputs >= 1, "energy", "n_outputs", "must be at least 1");
    for (double n : a.nu_values) need(n > 0.5 && n < 1, "appendix", "nu_values", "every nu must lie in (1/2, 1)");
    need(!a.nu_values.empty(), "appendix", "nu_values", "must be nonempty");
    need(a.itwo_configs >= 2 && a.ithree_configs >= 2, "appendix", "itwo_configs", "need at least 2 configs");
    need(a.powers_samples >= 10, "appendix", "powers_samples", "need at least 10 samples");
    need(a.iest_scales >= 2, "appendix", "iest_scales", "need at least 2 scales");
    need(c.probe.n_pairs >= 10, "kernel_probe", "n_pairs", "need at least 10 pairs");
    for (double x : c.probe.eps_values) need(x >= 0 && x <= 1, "kernel_probe", "eps_values", "every eps must lie in [0, 1]");
    need(!c.output_dir.empty(), "run", "output_dir", "must be nonempty");
    if (!known_checks.empty())
        for (const auto& name : c.checks) need(known_checks.count(name) > 0, "run", "checks", "unknown check '" + name + "'");
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::set<std::string>& known_checks = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, 0, "", "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, known_checks);
}

inline json to_json(const ExperimentConfig& c) {
    json checks = json::array();
    for (const auto& s : c.checks) checks.push_back(s);
    const auto& ic = c.integrator;
    return {
        {"nu", c.nu},
        {"eps", c.eps},
        {"vorticity",
         {{"kind", c.vorticity.kind},
          {"amplitude", c.vorticity.amplitude},
          {"r_inner", c.vorticity.r_inner},
          {"r_outer", c.vorticity.r_outer},
          {"theta_lo", c.vorticity.theta_lo},
          {"theta_hi", c.vorticity.theta_hi},
          {"center", {c.vorticity.center_re, c.vorticity.center_im}},
          {"sigma", c.vorticity.sigma},
          {"cutoff", c.vorticity.cutoff}}},
        {"h", c.h},
        {"blob_delta", c.delta()},
        {"integrator",
         {{"T", c.T},
          {"dt_max", ic.dt_max},
          {"cfl_fraction", ic.cfl_fraction},
          {"scheme", ic.scheme == Scheme::rk4 ? "rk4" : "rk2"},
          {"floor_im", ic.floor_im},
          {"geometric_levels", ic.geometric_levels},
          {"geometric_anchor", ic.geometric_anchor},
          {"linear_samples", ic.linear_samples}}},
        {"checks", checks},
        {"seed", c.seed},
    };
}

}  // namespace cornerflow
