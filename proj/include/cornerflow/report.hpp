#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace cornerflow {

using json = nlohmann::json;

/// Measured form of a "lhs <~ rhs" claim: ratio statistics plus a pass flag.
struct BoundCheckReport {
    std::string check_name;
    json params = json::object();
    std::size_t n_samples = 0;
    double max_ratio = 0.0;
    double q99_ratio = 0.0;
    double fitted_constant = 0.0;
    /// max/min of the constants fitted on two independent sample sets
    double stability_factor = 1.0;
    double stability_bound = 2.0;
    /// ratio near the degenerate end of a sweep over its value mid-sweep; NaN when not a sweep
    double growth_factor = std::numeric_limits<double>::quiet_NaN();
    double growth_bound = 1.5;
    std::map<std::string, double> fitted_constants;
    std::size_t violations = 0;
    std::vector<std::string> notes;
    bool pass = false;

    /// Recomputes pass from the ratio statistics; `extra` folds in check-specific conditions.
    bool settle(bool extra = true) {
        bool growth_ok = std::isnan(growth_factor) || growth_factor <= growth_bound;
        pass = std::isfinite(max_ratio) && stability_factor <= stability_bound && growth_ok && violations == 0 && extra;
        return pass;
    }
};

inline double nan_safe(double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::quiet_NaN(); }

inline json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return nullptr;
    return x > 0 ? "inf" : "-inf";
}

inline json to_json(const BoundCheckReport& r) {
    json fc = json::object();
    fc["fitted_constant"] = finite_or_null(r.fitted_constant);
    fc["stability_factor"] = finite_or_null(r.stability_factor);
    if (!std::isnan(r.growth_factor)) fc["growth_factor"] = finite_or_null(r.growth_factor);
    for (const auto& [k, v] : r.fitted_constants) fc[k] = finite_or_null(v);
    json j = {
        {"check_name", r.check_name},
        {"params", r.params},
        {"n_samples", r.n_samples},
        {"max_ratio", finite_or_null(r.max_ratio)},
        {"q99_ratio", finite_or_null(r.q99_ratio)},
        {"fitted_constants", fc},
        {"pass", r.pass},
    };
    if (r.violations > 0) j["violations"] = r.violations;
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j;
}

struct RatioStats {
    double max = 0.0;
    double q99 = 0.0;
    double min = 0.0;
};

/// Non-finite ratios propagate into max so a blow-up is never hidden.
inline RatioStats ratio_stats(std::vector<double> ratios) {
    RatioStats s;
    if (ratios.empty()) return s;
    for (double r : ratios)
        if (!std::isfinite(r)) {
            s.max = std::numeric_limits<double>::infinity();
        }
    std::sort(ratios.begin(), ratios.end(), [](double a, double b) {
        if (std::isnan(a)) return false;
        if (std::isnan(b)) return true;
        return a < b;
    });
    if (s.max == 0.0) s.max = ratios.back();
    s.min = ratios.front();
    auto k = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ratios.size()))) - 1;
    s.q99 = ratios[std::min(k, ratios.size() - 1)];
    return s;
}

/// max(a,b)/min(a,b); two negligible constants count as perfectly stable.
inline double stability(double a, double b, double negligible = 1e-300) {
    a = std::abs(a);
    b = std::abs(b);
    if (a <= negligible && b <= negligible) return 1.0;
    if (a <= negligible || b <= negligible) return std::numeric_limits<double>::infinity();
    return std::max(a, b) / std::min(a, b);
}

}  // namespace cornerflow
