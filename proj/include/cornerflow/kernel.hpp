#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "geometry.hpp"
#include "report.hpp"
#include "summation.hpp"
#include "vorticity.hpp"

namespace cornerflow {

struct SingularityError : std::domain_error {
    using std::domain_error::domain_error;
};

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KernelConfig {
    /// Krasny smoothing length in mapped (half-plane) coordinates
    double blob_delta = 0.0;
    /// skip the direct i = j term when evaluating at the particles themselves
    bool exclude_self = true;
    /// 0 means: environment variable, then hardware
    unsigned threads = 0;

    static KernelConfig for_cell_size(double h, unsigned threads = 0) {
        return {std::pow(h, 0.9), true, threads};
    }
};

/// 1/a, or its Krasny-smoothed form conj(a)/(|a|^2 + delta^2).
inline cplx smoothed_reciprocal(cplx a, double delta) {
    if (delta == 0.0) {
        if (a == cplx{}) throw SingularityError("kernel evaluated at a source point with zero blob size");
        return 1.0 / a;
    }
    return std::conj(a) / (std::norm(a) + delta * delta);
}

/// 1/(conj w - conj s) - 1/(conj w - s): direct plus image term in mapped coordinates.
inline cplx image_bracket(cplx w, cplx s, double delta) {
    return smoothed_reciprocal(std::conj(w) - std::conj(s), delta) - smoothed_reciprocal(std::conj(w) - s, delta);
}

/// Velocity at z1 induced by a unit vortex at z2.
inline cplx kernel_eval(cplx z1, cplx z2, const WedgeParams& p, double delta = 0.0) {
    if (z1 == z2 && delta == 0.0) throw SingularityError("kernel_eval: coincident points");
    cplx w1 = map_to_halfplane(z1, p), w2 = map_to_halfplane(z2, p);
    return I / (2 * pi) * std::conj(map_derivative(z1, p)) * image_bracket(w1, w2, delta);
}

/// Mapped sources laid out for the pairwise sum.
struct SourceSet {
    std::vector<double> x, y, gamma;

    std::size_t size() const { return x.size(); }

    static SourceSet from_points(const std::vector<cplx>& w, const std::vector<double>& g) {
        SourceSet s;
        s.x.reserve(w.size());
        s.y.reserve(w.size());
        for (cplx v : w) {
            s.x.push_back(v.real());
            s.y.push_back(v.imag());
        }
        s.gamma = g;
        return s;
    }
};

inline SourceSet mapped_sources(const VortexEnsemble& ens, const WedgeParams& p) {
    if (!p.smoothed()) return SourceSet::from_points(ens.positions_h, ens.circulations);
    std::vector<cplx> w;
    w.reserve(ens.size());
    for (cplx x : ens.positions_omega) w.push_back(map_to_halfplane(x, p));
    return SourceSet::from_points(w, ens.circulations);
}

/// sum_j gamma_j * bracket(w, s_j), compensated, in index order; `skip` drops the direct term of one source.
inline cplx bracket_sum(cplx w, const SourceSet& s, double delta, std::size_t skip = SIZE_MAX) {
    const double wx = w.real(), wy = w.imag(), d2 = delta * delta;
    CompensatedSum re, im;
    const std::size_t n = s.size();
    for (std::size_t j = 0; j < n; ++j) {
        double dx = wx - s.x[j], dy1 = wy - s.y[j], dy2 = wy + s.y[j];
        double q2 = dx * dx + dy2 * dy2 + d2;
        double g = s.gamma[j];
        if (j == skip) {
            re.add(-g * dx / q2);
            im.add(-g * dy2 / q2);
            continue;
        }
        double q1 = dx * dx + dy1 * dy1 + d2;
        if (q1 == 0.0) throw SingularityError("evaluation point coincides with a source and blob size is zero");
        re.add(g * (dx / q1 - dx / q2));
        im.add(g * (dy1 / q1 - dy2 / q2));
    }
    return {re.value(), im.value()};
}

/// b in mapped coordinates at each target; with `aligned`, target i is source i.
inline std::vector<cplx> b_tilde_field(const SourceSet& s, const std::vector<cplx>& targets, double delta, bool aligned,
                                       unsigned threads) {
    std::vector<cplx> out(targets.size());
    parallel_for(targets.size(), resolve_threads(threads), [&](std::size_t i) {
        out[i] = I / (2 * pi) * bracket_sum(targets[i], s, delta, aligned ? i : SIZE_MAX);
    });
    return out;
}

inline cplx b_tilde(const VortexEnsemble& ens, cplx y, const KernelConfig& k) {
    if (ens.empty()) throw std::invalid_argument("b_tilde: empty ensemble");
    return I / (2 * pi) * bracket_sum(y, SourceSet::from_points(ens.positions_h, ens.circulations), k.blob_delta);
}

inline cplx b_eval(const VortexEnsemble& ens, cplx z, const WedgeParams& p, const KernelConfig& k) {
    if (ens.empty()) throw std::invalid_argument("b_eval: empty ensemble");
    return I / (2 * pi) * bracket_sum(map_to_halfplane(z, p), mapped_sources(ens, p), k.blob_delta);
}

inline cplx velocity(const VortexEnsemble& ens, cplx z, const WedgeParams& p, const KernelConfig& k) {
    return std::conj(map_derivative(z, p)) * b_eval(ens, z, p, k);
}

/// Velocities at many probe points, one mapped source set shared across workers.
inline std::vector<cplx> velocity_field(const VortexEnsemble& ens, const std::vector<cplx>& zs, const WedgeParams& p,
                                        const KernelConfig& k) {
    if (ens.empty()) throw std::invalid_argument("velocity_field: empty ensemble");
    SourceSet s = mapped_sources(ens, p);
    std::vector<cplx> out(zs.size());
    parallel_for(zs.size(), resolve_threads(k.threads), [&](std::size_t i) {
        out[i] = std::conj(map_derivative(zs[i], p)) * (I / (2 * pi)) *
                 bracket_sum(map_to_halfplane(zs[i], p), s, k.blob_delta);
    });
    return out;
}

namespace detail {

/// Adaptive G7-K21 on [a, b], rescaled to [0, 1] first: Boost compares an unscaled error estimate
/// against a scaled tolerance, which never terminates on very short intervals.
template <class F>
double gk_integrate(F&& f, double a, double b, double tol, double* err, unsigned depth = 18) {
    double e = 0.0, w = b - a;
    if (w == 0.0) return 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        [&](double t) { return w * f(a + w * t); }, 0.0, 1.0, depth, tol, &e);
    if (err) *err += e;
    return v;
}

}  // namespace detail

/// Corner value b(0,0) = (nu^2/pi) int_H Im(s) w0(s^nu) |s|^{2nu-4} ds.
/// Polar coordinates s = rho e^{i phi} and rho = u^{1/(2nu-1)} leave a bounded integrand.
inline double b_zero(const InitialVorticity& w0, double nu, double rel_tol = 1e-6) {
    if (!(nu > 0.5 && nu < 1.0)) throw DomainError("b_zero: nu out of range");
    if (w0.l1_norm() == 0.0) return 0.0;
    auto box = w0.polar_box();
    double th_lo = std::max(0.0, box[2]), th_hi = std::min(nu * pi, box[3]);
    if (th_hi <= th_lo) return 0.0;
    const double q = 2 * nu - 1;
    double err = 0.0;
    auto radial = [&](double phi) {
        double th = nu * phi;
        auto iv = w0.radial_support(th);
        if (!iv || iv->hi <= iv->lo) return 0.0;
        double u0 = std::pow(iv->lo, q / nu), u1 = std::pow(iv->hi, q / nu);
        double inner_err = 0.0;
        double v = detail::gk_integrate(
            [&](double u) {
                double rho = std::pow(u, 1.0 / q);
                return w0(std::polar(std::pow(rho, nu), th));
            },
            u0, u1, 1e-12, &inner_err);
        return std::sin(phi) * v / q;
    };
    double outer_err = 0.0;
    double val = detail::gk_integrate(radial, th_lo / nu, th_hi / nu, 1e-11, &outer_err);
    err = outer_err;
    double b0 = nu * nu / pi * val;
    if (!(err <= rel_tol * std::abs(val)) && std::abs(val) > 0) throw QuadratureError("b_zero: quadrature did not converge");
    return b0;
}

/// |K(z1,z2)| |z1-z2| over random pairs; pairs are drawn in the half plane (log-uniform radius,
/// a share of them nearly coincident) and mapped back, so the corner and the diagonal are both covered.
inline BoundCheckReport kernel_bound_check(const WedgeParams& p, std::size_t n_pairs = 10000, std::uint64_t seed = 1) {
    BoundCheckReport rep;
    rep.check_name = "kernel_bound_check";
    rep.params = {{"nu", p.nu()}, {"eps", p.eps()}, {"n_pairs", n_pairs}, {"seed", seed}};
    auto sweep = [&](std::uint64_t sd) {
        std::mt19937_64 rng(sd);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> ratios;
        ratios.reserve(n_pairs);
        while (ratios.size() < n_pairs) {
            cplx w1 = std::polar(std::pow(10.0, -4.0 + 6.0 * u(rng)), pi * u(rng));
            cplx w2 = u(rng) < 0.5 ? w1 + std::abs(w1) * std::polar(std::pow(10.0, -6.0 + 6.0 * u(rng)), 2 * pi * u(rng))
                                   : std::polar(std::pow(10.0, -4.0 + 6.0 * u(rng)), pi * u(rng));
            if (!(w1.imag() > 0.0 && w2.imag() > 0.0) || w1 == w2) continue;
            cplx z1 = map_from_halfplane(w1, p), z2 = map_from_halfplane(w2, p);
            if (z1 == z2) continue;
            ratios.push_back(std::abs(kernel_eval(z1, z2, p)) * std::abs(z1 - z2));
        }
        return ratios;
    };
    auto ra = sweep(seed), rb = sweep(seed + 1);
    auto sa = ratio_stats(ra), sb = ratio_stats(rb);
    rep.n_samples = ra.size() + rb.size();
    rep.max_ratio = std::max(sa.max, sb.max);
    rep.q99_ratio = std::max(sa.q99, sb.q99);
    rep.fitted_constant = rep.max_ratio;
    rep.fitted_constants["constant_seed_a"] = sa.max;
    rep.fitted_constants["constant_seed_b"] = sb.max;
    rep.stability_factor = stability(sa.max, sb.max);
    rep.settle();
    return rep;
}

/// Annular sector {r_min <= |z| <= r_max, theta_min <= arg <= theta_max}.
struct SectorRegion {
    double r_min, r_max, theta_min, theta_max;

    cplx sample(std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double r = std::sqrt(r_min * r_min + u(rng) * (r_max * r_max - r_min * r_min));
        return std::polar(r, theta_min + u(rng) * (theta_max - theta_min));
    }
    bool contains(cplx z) const {
        double r = std::abs(z), th = std::arg(z);
        return r >= r_min && r <= r_max && th >= theta_min && th <= theta_max;
    }
};

/// Interior log-Lipschitz modulus of the induced velocity, measured on random close pairs.
inline BoundCheckReport log_lipschitz_probe(const VortexEnsemble& ens, const SectorRegion& region, const WedgeParams& p,
                                            const KernelConfig& k, std::size_t n_pairs = 10000, std::uint64_t seed = 1) {
    BoundCheckReport rep;
    rep.check_name = "log_lipschitz_probe";
    rep.params = {{"nu", p.nu()},
                  {"eps", p.eps()},
                  {"blob_delta", k.blob_delta},
                  {"n_pairs", n_pairs},
                  {"seed", seed},
                  {"region", {region.r_min, region.r_max, region.theta_min, region.theta_max}}};
    const double norm = ens.l1_linf_norm();
    const double scale = region.r_max - region.r_min;
    auto sweep = [&](std::size_t n, std::uint64_t sd) {
        std::mt19937_64 rng(sd);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<cplx> a, b;
        while (a.size() < n) {
            cplx z1 = region.sample(rng);
            double d = scale * std::pow(10.0, -4.0 + 3.0 * u(rng));
            cplx z2 = z1 + std::polar(d, 2 * pi * u(rng));
            if (!region.contains(z2) || z2 == z1) continue;
            a.push_back(z1);
            b.push_back(z2);
        }
        auto ua = velocity_field(ens, a, p, k), ub = velocity_field(ens, b, p, k);
        std::vector<double> ratios;
        ratios.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            double d = std::abs(a[i] - b[i]);
            double m = std::min(std::abs(a[i]), std::abs(b[i]));
            double modulus = d * std::max(-std::log(d), 1.0) + d * std::pow(m, 1.0 / p.nu() - 2.0);
            ratios.push_back(norm > 0 ? std::abs(ua[i] - ub[i]) / (norm * modulus) : 0.0);
        }
        return ratios;
    };
    auto ra = sweep(n_pairs, seed);
    auto rb = sweep(4 * n_pairs, seed + 1);
    auto sa = ratio_stats(ra), sb = ratio_stats(rb);
    rep.n_samples = ra.size() + rb.size();
    rep.max_ratio = std::max(sa.max, sb.max);
    rep.q99_ratio = sb.q99;
    rep.fitted_constant = sb.max;
    rep.fitted_constants["constant_sparse"] = sa.max;
    rep.fitted_constants["constant_dense"] = sb.max;
    rep.stability_factor = stability(sa.max, sb.max);
    rep.settle();
    return rep;
}

}  // namespace cornerflow
