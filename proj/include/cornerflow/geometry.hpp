#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cornerflow {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Angle parameter nu (opening angle nu*pi) and smoothing parameter eps.
class WedgeParams {
public:
    WedgeParams(double nu, double eps = 0.0) : WedgeParams(nu, eps, false) {}

    /// Same formulas with nu anywhere in (0, 1]; used for the nu=1 reduction.
    static WedgeParams extended(double nu, double eps = 0.0) { return WedgeParams(nu, eps, true); }

    double nu() const { return nu_; }
    double eps() const { return eps_; }
    bool smoothed() const { return eps_ > 0.0; }

    /// c(eps) = i(eps + 1/eps); only meaningful when eps > 0.
    cplx c_eps() const {
        if (!smoothed()) throw DomainError("c(eps) is undefined for eps = 0");
        return {0.0, eps_ + 1.0 / eps_};
    }

    double opening() const { return nu_ * pi; }
    double bisector() const { return 0.5 * nu_ * pi; }

private:
    WedgeParams(double nu, double eps, bool ext) : nu_(nu), eps_(eps) {
        bool nu_ok = ext ? (nu > 0.0 && nu <= 1.0) : (nu > 0.5 && nu < 1.0);
        if (!nu_ok) throw DomainError("nu out of range: " + std::to_string(nu));
        if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("eps out of range: " + std::to_string(eps));
    }

    double nu_;
    double eps_;
};

/// arg in [0, 2pi)
inline double arg_2pi(cplx z) {
    double a = std::arg(z);
    if (a < 0.0) a += 2.0 * pi;
    // arg of (-0.0 imaginary) can land exactly on 2pi after the shift
    if (a >= 2.0 * pi) a = 0.0;
    return a;
}

/// z^a on the branch arg z in [0, 2pi).
inline cplx sector_power(cplx z, double a) {
    if (z == cplx{}) {
        if (a > 0.0) return {};
        throw DomainError("sector_power: zero base with non-positive exponent");
    }
    double lr = std::log(std::abs(z));
    return std::polar(std::exp(a * lr), a * arg_2pi(z));
}

inline bool in_closed_sector(cplx z, double opening, double slack = 1e-12) {
    if (z == cplx{}) return true;
    double a = arg_2pi(z);
    if (a > pi + 1.0) a -= 2.0 * pi;  // tiny negative angles just below the real axis
    return a >= -slack && a <= opening + slack;
}

inline cplx map_to_halfplane(cplx z, const WedgeParams& p) {
    if (!in_closed_sector(z, p.opening(), 1e-9)) throw DomainError("map_to_halfplane: point outside the closed wedge");
    if (z == cplx{} && !p.smoothed()) return {};
    cplx zp = sector_power(z, 1.0 / p.nu());
    if (!p.smoothed()) return zp;
    double e = p.eps();
    if (std::abs(zp) <= 1.0) {
        // Moebius form, well conditioned near the corner
        return (zp - I * e) / (1.0 + e * e + I * e * zp);
    }
    return -I / e + 1.0 / (e * e * (zp - p.c_eps()));
}

/// Both algebraic forms of the smoothed map, exposed for cross-checking.
inline cplx map_to_halfplane_moebius(cplx z, const WedgeParams& p) {
    double e = p.eps();
    cplx zp = sector_power(z, 1.0 / p.nu());
    return (zp - I * e) / (1.0 + e * e + I * e * zp);
}

inline cplx map_to_halfplane_pole(cplx z, const WedgeParams& p) {
    double e = p.eps();
    cplx zp = sector_power(z, 1.0 / p.nu());
    return -I / e + 1.0 / (e * e * (zp - p.c_eps()));
}

inline cplx map_from_halfplane(cplx w, const WedgeParams& p) {
    if (!p.smoothed()) return w == cplx{} ? cplx{} : sector_power(w, p.nu());
    double e = p.eps();
    cplx inner;
    if (std::abs(w) <= 1.0) {
        inner = w / (1.0 - I * e * w) + I * e;
    } else {
        inner = p.c_eps() + 1.0 / (e * (I + e * w));
    }
    return inner == cplx{} ? cplx{} : sector_power(inner, p.nu());
}

/// Derivative of the map at z; for eps = 0 it vanishes at the corner.
inline cplx map_derivative(cplx z, const WedgeParams& p) {
    double nu = p.nu();
    if (z == cplx{}) {
        if (!p.smoothed()) return {};
        throw DomainError("map_derivative: corner is not in the smoothed domain interior");
    }
    cplx zq = sector_power(z, 1.0 / nu - 1.0);
    if (!p.smoothed()) return zq / nu;
    double e = p.eps();
    cplx d = sector_power(z, 1.0 / nu) - p.c_eps();
    return -zq / (nu * e * e * d * d);
}

/// Derivative of the map evaluated at the preimage of w, written in w.
inline cplx map_derivative_at_image(cplx w, const WedgeParams& p) {
    double nu = p.nu();
    if (!p.smoothed()) return sector_power(w, 1.0 - nu) / nu;
    double e = p.eps();
    cplx a = I + e * w;
    cplx inner = w / (1.0 - I * e * w) + I * e;
    return -(a * a) * sector_power(inner, 1.0 - nu) / nu;
}

/// Euclidean distance from z in the closed wedge to its boundary rays.
inline double distance_to_wedge_boundary(cplx z, double opening) {
    double r = std::abs(z);
    if (r == 0.0) return 0.0;
    double th = arg_2pi(z);
    if (th > pi + 1.0) th -= 2.0 * pi;
    double d0 = th <= 0.5 * pi ? r * std::sin(th) : r;
    double phi = opening - th;
    double d1 = phi <= 0.5 * pi ? r * std::sin(phi) : r;
    return std::max(0.0, std::min(d0, d1));
}

}  // namespace cornerflow
