#pragma once

#include <set>
#include <string>
#include <vector>

#include "report.hpp"

namespace cornerflow {

struct CatalogEntry {
    std::string name;
    std::string module;
    std::string subcommand;
    std::string anchor;
    json defaults;
};

inline const std::vector<CatalogEntry>& check_catalog() {
    static const std::vector<CatalogEntry> cat{
        {"corner_probe", "flow", "verify-flow", "corner value b0 approximates b on a small ball for a short time",
         {{"eps_fraction", 0.5}, {"probe_radius", 0.4}, {"min_window", 0.0}}},
        {"trajectory_lower_bound_check", "flow", "verify-flow", "corner particles move away at least like a power of t",
         {{"tol", 0.05}, {"angle_slack", 1e-8}}},
        {"right_motion_check", "flow", "verify-flow", "Re Y is nondecreasing near the corner", {{"slack_per_step", 1e-12}}},
        {"distance_bound_check", "flow", "verify-flow", "Im Y stays between powers of its initial value",
         {{"c_rate", 1.0}}},
        {"long_time_floor_check", "flow", "verify-flow", "particles near the corner stay away from it for all time",
         {{"T1", 0.5}, {"T2", 2.0}, {"floor", 1e-6}}},
        {"phi", "energy", "verify-energy", "log-Lipschitz modulus x max(-ln x, 1)", {{"samples", 200}}},
        {"e1", "energy", "verify-energy", "vorticity-weighted L1 distance between two flow maps",
         {{"h0", 0.04}, {"dt0", 0.02}, {"levels", 3}}},
        {"weighted_energy", "energy", "verify-energy", "time-weighted energy t^-alpha E1", {{"alpha", 1.0}}},
        {"choose_constants", "energy", "verify-energy", "exponent and smallness constants of the energy contraction",
         {{"alpha", "1/(2 nu - 1)"}}},
        {"model_ode_integrate", "energy", "verify-ode", "scalar model dx/dt = x^(1/nu - 1) against its closed form",
         {{"nu", 0.75}, {"x0", 1e-8}, {"T", 1.0}, {"rel_tol", 1e-3}}},
        {"model_energy_demo", "energy", "verify-ode", "three-step weighted-energy argument on the scalar model",
         {{"nu", 0.75}, {"alpha", 1.0}, {"eps", 0.1}}},
        {"e1_growth_fit", "energy", "verify-energy", "E1 grows no faster than a power of t near t = 0",
         {{"window", "[T/10, T]"}}},
        {"e1_self_convergence", "energy", "verify-energy", "E1 between successive refinements shrinks geometrically",
         {{"min_factor", 2.0}}},
        {"integral_I", "analysis_checks", "verify-appendix", "products of inverse node distances over a clipped region",
         {{"closed_forms", json::array({"disk area", "inverse distance over the unit disk", "lens area"})}, {"rel_tol", 1e-6}}},
        {"gronwall_phi_check", "analysis_checks", "verify-appendix", "Osgood comparison y' = +-c phi(y) gives power sandwiches",
         {{"cases", 5}, {"n_grid", 401}}},
        {"powers_inequality_check", "analysis_checks", "verify-appendix", "|a^nu - b^nu| against |a - b| min(|a|, |b|)^(nu - 1)",
         {{"n_samples", 20000}, {"nu_values", json::array({0.55, 0.75, 0.9})}}},
        {"itwo_bound_check", "analysis_checks", "verify-appendix", "two-node integral is controlled by phi of the separation",
         {{"n_configs", 12}}},
        {"ithree_bound_check", "analysis_checks", "verify-appendix", "three-node integral with a corner node of weight 1 - nu",
         {{"n_configs", 10}, {"nu_values", json::array({0.55, 0.75, 0.9})}}},
        {"iest_reduction_check", "analysis_checks", "verify-appendix", "multi-node integral reduces to its closest pair",
         {{"n_scales", 8}}},
        {"kernel_bound_check", "kernel", "kernel-probe", "|K(z1, z2)| |z1 - z2| stays bounded", {{"n_pairs", 10000}}},
        {"log_lipschitz_probe", "kernel", "kernel-probe", "velocity is log-Lipschitz away from the boundary", json::object()},
        {"b_zero", "kernel", "kernel-probe", "corner value of b from the initial vorticity", {{"rel_tol", 1e-6}}},
    };
    return cat;
}

inline std::set<std::string> check_names() {
    std::set<std::string> s;
    for (const auto& e : check_catalog()) s.insert(e.name);
    return s;
}

inline json to_json(const CatalogEntry& e) {
    return {{"name", e.name}, {"module", e.module}, {"subcommand", e.subcommand}, {"anchor", e.anchor}, {"defaults", e.defaults}};
}

}  // namespace cornerflow
