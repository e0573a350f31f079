#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "geometry.hpp"

namespace cornerflow {

struct EmptyEnsembleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// amplitude on {r_inner <= |z| <= r_outer, theta_lo <= arg z <= theta_hi}
struct AnnularSector {
    double r_inner, r_outer, theta_lo, theta_hi, amplitude = 1.0;
};

/// amplitude * exp(-|z-center|^2 / (2 sigma^2)) restricted to |z-center| <= cutoff*sigma
struct TruncatedGaussian {
    cplx center;
    double sigma;
    double cutoff = 4.0;
    double amplitude = 1.0;
};

/// Piecewise constant on cells [x0 + i dx, x0 + (i+1) dx] x [y0 + j dy, ...], values row-major in j.
struct CustomGrid {
    double x0, y0, dx, dy;
    std::size_t nx, ny;
    std::vector<double> values;
};

struct RadialInterval {
    double lo, hi;
};

class InitialVorticity {
public:
    enum class Kind { uniform_annular_sector, truncated_gaussian, custom_grid };

    InitialVorticity(AnnularSector s) : shape_(s) { check(); }
    InitialVorticity(TruncatedGaussian g) : shape_(g) { check(); }
    InitialVorticity(CustomGrid g) : shape_(std::move(g)) { check(); }

    static InitialVorticity zero() { return AnnularSector{0.1, 0.2, 0.0, 0.1, 0.0}; }

    Kind kind() const { return static_cast<Kind>(shape_.index()); }
    const auto& shape() const { return shape_; }

    double operator()(cplx z) const {
        return std::visit([&](const auto& s) { return eval(s, z); }, shape_);
    }

    double sup_norm() const {
        return std::visit([](const auto& s) { return sup(s); }, shape_);
    }

    double l1_norm() const {
        return std::visit([](const auto& s) { return l1(s); }, shape_);
    }

    /// ||w||_{L1 cap Linf} = ||w||_1 + ||w||_inf
    double l1_linf_norm() const { return l1_norm() + sup_norm(); }

    /// Axis-aligned box containing the support: {xmin, xmax, ymin, ymax}.
    std::array<double, 4> bounding_box() const {
        return std::visit([](const auto& s) { return bbox(s); }, shape_);
    }

    /// Polar box containing the support: {r_min, r_max, theta_min, theta_max}.
    std::array<double, 4> polar_box() const {
        return std::visit([](const auto& s) { return pbox(s); }, shape_);
    }

    /// Radial extent of the support along the ray arg z = theta, if any.
    std::optional<RadialInterval> radial_support(double theta) const {
        return std::visit([&](const auto& s) { return ray(s, theta); }, shape_);
    }

    InitialVorticity scaled(double factor) const {
        auto copy = *this;
        std::visit([&](auto& s) { scale(s, factor); }, copy.shape_);
        return copy;
    }

private:
    void check() const {
        std::visit([](const auto& s) { validate(s); }, shape_);
    }

    static void validate(const AnnularSector& s) {
        if (!(s.r_inner >= 0 && s.r_outer > s.r_inner && s.theta_hi >= s.theta_lo))
            throw std::invalid_argument("annular sector needs 0 <= r_inner < r_outer and theta_lo <= theta_hi");
    }
    static void validate(const TruncatedGaussian& g) {
        if (!(g.sigma > 0 && g.cutoff > 0)) throw std::invalid_argument("gaussian needs sigma > 0 and cutoff > 0");
    }
    static void validate(const CustomGrid& g) {
        if (!(g.dx > 0 && g.dy > 0) || g.values.size() != g.nx * g.ny || g.nx == 0 || g.ny == 0)
            throw std::invalid_argument("custom grid needs positive spacing and nx*ny values");
    }

    static double eval(const AnnularSector& s, cplx z) {
        double r = std::abs(z);
        if (r < s.r_inner || r > s.r_outer || r == 0.0) return 0.0;
        double th = std::arg(z);
        if (th < s.theta_lo - 1e-14 || th > s.theta_hi + 1e-14) return 0.0;
        return s.amplitude;
    }
    static double eval(const TruncatedGaussian& g, cplx z) {
        double d2 = std::norm(z - g.center);
        if (d2 > g.cutoff * g.cutoff * g.sigma * g.sigma) return 0.0;
        return g.amplitude * std::exp(-d2 / (2 * g.sigma * g.sigma));
    }
    static double eval(const CustomGrid& g, cplx z) {
        double fx = (z.real() - g.x0) / g.dx, fy = (z.imag() - g.y0) / g.dy;
        if (fx < 0 || fy < 0) return 0.0;
        auto i = static_cast<std::size_t>(fx), j = static_cast<std::size_t>(fy);
        if (i >= g.nx || j >= g.ny) return 0.0;
        return g.values[j * g.nx + i];
    }

    static double sup(const AnnularSector& s) { return std::abs(s.amplitude); }
    static double sup(const TruncatedGaussian& g) { return std::abs(g.amplitude); }
    static double sup(const CustomGrid& g) {
        double m = 0;
        for (double v : g.values) m = std::max(m, std::abs(v));
        return m;
    }

    static double l1(const AnnularSector& s) {
        return std::abs(s.amplitude) * 0.5 * (s.theta_hi - s.theta_lo) * (s.r_outer * s.r_outer - s.r_inner * s.r_inner);
    }
    static double l1(const TruncatedGaussian& g) {
        return std::abs(g.amplitude) * 2 * pi * g.sigma * g.sigma * (1 - std::exp(-0.5 * g.cutoff * g.cutoff));
    }
    static double l1(const CustomGrid& g) {
        double s = 0;
        for (double v : g.values) s += std::abs(v);
        return s * g.dx * g.dy;
    }

    static std::array<double, 4> bbox(const AnnularSector& s) {
        // extremes of the sector: corner points plus any axis crossings
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        auto take = [&](cplx z) {
            xmin = std::min(xmin, z.real());
            xmax = std::max(xmax, z.real());
            ymin = std::min(ymin, z.imag());
            ymax = std::max(ymax, z.imag());
        };
        for (double r : {s.r_inner, s.r_outer})
            for (double th : {s.theta_lo, s.theta_hi}) take(std::polar(r, th));
        for (int k = -4; k <= 4; ++k) {
            double th = k * 0.5 * pi;
            if (th > s.theta_lo && th < s.theta_hi) take(std::polar(s.r_outer, th));
        }
        return {xmin, xmax, ymin, ymax};
    }
    static std::array<double, 4> bbox(const TruncatedGaussian& g) {
        double rad = g.cutoff * g.sigma;
        return {g.center.real() - rad, g.center.real() + rad, g.center.imag() - rad, g.center.imag() + rad};
    }
    static std::array<double, 4> bbox(const CustomGrid& g) {
        return {g.x0, g.x0 + g.nx * g.dx, g.y0, g.y0 + g.ny * g.dy};
    }

    static std::array<double, 4> pbox(const AnnularSector& s) {
        return {s.r_inner, s.r_outer, s.theta_lo, s.theta_hi};
    }
    static std::array<double, 4> pbox(const TruncatedGaussian& g) {
        double rad = g.cutoff * g.sigma, d = std::abs(g.center);
        if (d <= rad) return {0.0, d + rad, -pi, pi};
        double half = std::asin(rad / d), c = std::arg(g.center);
        return {d - rad, d + rad, c - half, c + half};
    }
    static std::array<double, 4> pbox(const CustomGrid& g) {
        double rmin = 1e300, rmax = 0, tmin = 1e300, tmax = -1e300;
        for (double x : {g.x0, g.x0 + g.nx * g.dx})
            for (double y : {g.y0, g.y0 + g.ny * g.dy}) {
                cplx z{x, y};
                rmax = std::max(rmax, std::abs(z));
                tmin = std::min(tmin, std::arg(z));
                tmax = std::max(tmax, std::arg(z));
            }
        // nearest point of the rectangle to the origin
        double cx = std::clamp(0.0, g.x0, g.x0 + g.nx * g.dx), cy = std::clamp(0.0, g.y0, g.y0 + g.ny * g.dy);
        rmin = std::abs(cplx{cx, cy});
        if (rmin == 0.0) return {0.0, rmax, -pi, pi};
        return {rmin, rmax, tmin, tmax};
    }

    static std::optional<RadialInterval> ray(const AnnularSector& s, double th) {
        if (th < s.theta_lo || th > s.theta_hi) return std::nullopt;
        return RadialInterval{s.r_inner, s.r_outer};
    }
    static std::optional<RadialInterval> ray(const TruncatedGaussian& g, double th) {
        // |t e^{i th} - c|^2 = rad^2  ->  t^2 - 2 t b + |c|^2 - rad^2 = 0
        double rad = g.cutoff * g.sigma;
        double b = g.center.real() * std::cos(th) + g.center.imag() * std::sin(th);
        double disc = b * b - (std::norm(g.center) - rad * rad);
        if (disc <= 0) return std::nullopt;
        double sq = std::sqrt(disc);
        double lo = std::max(0.0, b - sq), hi = b + sq;
        if (hi <= 0) return std::nullopt;
        return RadialInterval{lo, hi};
    }
    static std::optional<RadialInterval> ray(const CustomGrid& g, double th) {
        auto pb = pbox(g);
        if (th < pb[2] || th > pb[3]) return std::nullopt;
        return RadialInterval{pb[0], pb[1]};
    }

    static void scale(AnnularSector& s, double f) { s.amplitude *= f; }
    static void scale(TruncatedGaussian& g, double f) { g.amplitude *= f; }
    static void scale(CustomGrid& g, double f) {
        for (double& v : g.values) v *= f;
    }

    std::variant<AnnularSector, TruncatedGaussian, CustomGrid> shape_;
};

inline const char* kind_name(InitialVorticity::Kind k) {
    switch (k) {
        case InitialVorticity::Kind::uniform_annular_sector: return "uniform-annular-sector";
        case InitialVorticity::Kind::truncated_gaussian: return "truncated-gaussian";
        case InitialVorticity::Kind::custom_grid: return "custom-grid";
    }
    return "?";
}

/// Point vortices in wedge coordinates with cached half-plane images.
struct VortexEnsemble {
    double nu = 0.75;
    double cell_size = 0.0;
    std::vector<cplx> positions_omega;
    std::vector<cplx> positions_h;
    std::vector<double> circulations;

    std::size_t size() const { return positions_omega.size(); }
    bool empty() const { return positions_omega.empty(); }

    double total_abs_circulation() const {
        double s = 0;
        for (double g : circulations) s += std::abs(g);
        return s;
    }

    double max_abs_circulation() const {
        double m = 0;
        for (double g : circulations) m = std::max(m, std::abs(g));
        return m;
    }

    /// Discrete analogue of ||w||_{L1 cap Linf}.
    double l1_linf_norm() const {
        double sup = cell_size > 0 ? max_abs_circulation() / (cell_size * cell_size) : 0.0;
        return total_abs_circulation() + sup;
    }

    void push_back(cplx x, double gamma) {
        positions_omega.push_back(x);
        positions_h.push_back(x == cplx{} ? cplx{} : sector_power(x, 1.0 / nu));
        circulations.push_back(gamma);
    }

    VortexEnsemble negated() const {
        auto copy = *this;
        for (double& g : copy.circulations) g = -g;
        return copy;
    }

    static VortexEnsemble from_points(double nu, double cell_size, const std::vector<cplx>& xs,
                                      const std::vector<double>& gammas) {
        if (xs.size() != gammas.size()) throw std::invalid_argument("positions and circulations differ in length");
        VortexEnsemble e;
        e.nu = nu;
        e.cell_size = cell_size;
        for (std::size_t i = 0; i < xs.size(); ++i) e.push_back(xs[i], gammas[i]);
        return e;
    }
};

inline VortexEnsemble discretize(const InitialVorticity& w0, double h, double nu) {
    if (!(h > 0)) throw std::invalid_argument("discretize: h must be positive");
    auto [xmin, xmax, ymin, ymax] = w0.bounding_box();
    // cells [k h, (k+1) h] anchored at the origin, so refined grids nest
    auto k0 = static_cast<long>(std::floor(xmin / h)), k1 = static_cast<long>(std::ceil(xmax / h));
    auto l0 = static_cast<long>(std::floor(ymin / h)), l1 = static_cast<long>(std::ceil(ymax / h));
    VortexEnsemble e;
    e.nu = nu;
    e.cell_size = h;
    for (long l = l0; l < l1; ++l) {
        for (long k = k0; k < k1; ++k) {
            cplx x{(k + 0.5) * h, (l + 0.5) * h};
            double w = w0(x);
            if (w > 0) e.push_back(x, w * h * h);
        }
    }
    if (e.empty()) throw EmptyEnsembleError("discretize: no cell center carries positive vorticity");
    return e;
}

struct ValidationReport {
    bool nonnegative = true;
    bool support_in_half_wedge = true;
    bool finite_norms = true;
    std::vector<std::string> violations;
    bool pass() const { return violations.empty(); }
};

/// Checks nonnegativity and support in the closed bisector half of the wedge on a dense sample.
inline ValidationReport validate_assumptions(const InitialVorticity& w0, double nu, std::size_t samples_per_axis = 400) {
    ValidationReport rep;
    double half = 0.5 * nu * pi;
    if (!std::isfinite(w0.l1_norm()) || !std::isfinite(w0.sup_norm())) {
        rep.finite_norms = false;
        rep.violations.push_back("norms are not finite");
    }
    auto [xmin, xmax, ymin, ymax] = w0.bounding_box();
    std::size_t neg = 0, outside = 0;
    for (std::size_t j = 0; j < samples_per_axis; ++j) {
        for (std::size_t i = 0; i < samples_per_axis; ++i) {
            cplx z{xmin + (i + 0.5) * (xmax - xmin) / samples_per_axis, ymin + (j + 0.5) * (ymax - ymin) / samples_per_axis};
            double w = w0(z);
            if (w < 0) ++neg;
            if (w != 0) {
                double th = std::arg(z);
                if (th < -1e-12 || th > half + 1e-12) ++outside;
            }
        }
    }
    if (neg > 0) {
        rep.nonnegative = false;
        rep.violations.push_back("negative values at " + std::to_string(neg) + " sample points");
    }
    if (outside > 0) {
        rep.support_in_half_wedge = false;
        rep.violations.push_back("support leaves the closed bisector half at " + std::to_string(outside) + " sample points");
    }
    return rep;
}

}  // namespace cornerflow
