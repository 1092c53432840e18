#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "faultlab/geo2d.hpp"
#include "faultlab/quadrature.hpp"

namespace faultlab {

using Complex = std::complex<double>;
using Vec2c = std::array<Complex, 2>;
using Mat2c = std::array<std::array<Complex, 2>, 2>;

inline Vec2c operator+(const Vec2c& a, const Vec2c& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2c operator-(const Vec2c& a, const Vec2c& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2c operator*(const Complex& c, const Vec2c& v) { return {c * v[0], c * v[1]}; }
inline Complex dot_bilinear(const Vec2c& a, const Vec2c& b) { return a[0] * b[0] + a[1] * b[1]; }

enum class EdgeSide { plus, minus };

// Half-angle phase factor e^{i theta/2}.
inline Complex mu_hat(double theta) { return std::polar(1.0, 0.5 * theta); }

inline bool on_branch_cut(const Vec2& x, double eps = 0.0) {
    return x.y == eps && x.x <= 0.0;
}

namespace detail {
inline void reject_on_cut(const Vec2& x) {
    if (x.y == 0.0 && x.x <= 0.0)
        throw Error(ErrorKind::numeric, "CGO evaluation on the branch cut {x1<=0, x2=0}");
}
}  // namespace detail

/// Principal square root of z = x1 + i x2 with argument in (-pi, pi).
inline Complex principal_sqrt(const Vec2& x) {
    detail::reject_on_cut(x);
    return std::sqrt(Complex(x.x, x.y));
}

/// Exponentially decaying vector solution of the homogeneous isotropic
/// elastic system: u(x) = (e^{-s sqrt(z)}, i e^{-s sqrt(z)}) with z = x1 + i x2.
/// Divergence-free and componentwise harmonic off the branch cut.
inline Vec2c cgo_eval(const Vec2& x, double s) {
    Complex e = std::exp(-s * principal_sqrt(x));
    return {e, Complex(0.0, 1.0) * e};
}

/// Gradient of cgo_eval: -(s / (2 sqrt(r))) e^{-s sqrt(r) mu_hat(theta) - i theta/2}
/// [[1, i], [i, -1]]; symmetric and trace-free.
inline Mat2c cgo_grad(const Vec2& x, double s) {
    detail::reject_on_cut(x);
    double r = norm(x);
    if (r == 0.0) throw Error(ErrorKind::numeric, "CGO gradient singular at the vertex (r = 0)");
    double theta = std::atan2(x.y, x.x);
    Complex mh = mu_hat(theta);
    Complex pref = -(s / (2.0 * std::sqrt(r))) *
                   std::exp(-s * std::sqrt(r) * mh - Complex(0.0, 0.5 * theta));
    Complex I(0.0, 1.0);
    return {{{pref, pref * I}, {pref * I, -pref}}};
}

/// Scalar harmonic companion with square-root-in-s decay:
/// u0(x; s) = exp(-sqrt(s r) mu_hat(theta)).
inline Complex cgo_scalar_eval(const Vec2& x, double s) {
    detail::reject_on_cut(x);
    double r = norm(x);
    double theta = std::atan2(x.y, x.x);
    return std::exp(-std::sqrt(s * r) * mu_hat(theta));
}

/// Gradient of the scalar solution; components (d/dx1, d/dx2).
inline Vec2c cgo_scalar_grad(const Vec2& x, double s) {
    detail::reject_on_cut(x);
    double r = norm(x);
    if (r == 0.0) throw Error(ErrorKind::numeric, "scalar CGO gradient singular at the vertex");
    double theta = std::atan2(x.y, x.x);
    Complex mh = mu_hat(theta);
    // d/dz of e^{-sqrt(s) sqrt(z)} = -sqrt(s)/(2 sqrt(z)) e^{-sqrt(s) sqrt(z)}
    Complex dz = -std::sqrt(s) / (2.0 * std::sqrt(r) * mh) * std::exp(-std::sqrt(s * r) * mh);
    return {dz, Complex(0.0, 1.0) * dz};
}

// ---------------------------------------------------------------------------
// Sector description used by the closed forms below. Angles are the edge
// arguments of an open sector theta in (theta_m, theta_M) with vertex at the
// origin; the opening must lie in (0, pi) and both edges must avoid the cut.
// ---------------------------------------------------------------------------
struct SectorSpec {
    double theta_m = 0.0;
    double theta_M = 0.0;
    double h = 1.0;

    double opening() const { return theta_M - theta_m; }

    void validate() const {
        double d = opening();
        if (!(d > 0.0 && d < M_PI))
            throw Error(ErrorKind::validation, "sector opening must lie in (0, pi)");
        if (!(theta_m > -M_PI && theta_M < M_PI))
            throw Error(ErrorKind::validation, "sector edges must avoid the branch cut");
        if (!(h > 0.0)) throw Error(ErrorKind::validation, "sector radius must be positive");
    }
};

/// min over the closed sector of cos(theta/2); positive for admissible sectors.
inline double sector_decay_constant(double theta_m, double theta_M) {
    // cos(theta/2) is concave-unimodal on (-pi, pi); the minimum over a closed
    // interval is attained at an endpoint.
    return std::min(std::cos(0.5 * theta_m), std::cos(0.5 * theta_M));
}

/// Closed form of the first CGO component integrated over the infinite sector:
/// 6 i (e^{-2 i theta_M} - e^{-2 i theta_m}) s^{-4}.
inline Complex sector_integral_u01(double theta_m, double theta_M, double s) {
    Complex I(0.0, 1.0);
    return 6.0 * I * (std::exp(-2.0 * I * theta_M) - std::exp(-2.0 * I * theta_m)) *
           std::pow(s, -4.0);
}

/// Scalar analogue decaying at rate s^{-2}.
inline Complex scalar_sector_integral(double theta_m, double theta_M, double s) {
    Complex I(0.0, 1.0);
    return 6.0 * I * (std::exp(-2.0 * I * theta_M) - std::exp(-2.0 * I * theta_m)) *
           std::pow(s, -2.0);
}

/// Edge integral of the first CGO component along the ray at angle theta,
/// radii (0, h]:
///   2 s^{-2} (m^{-2} - m^{-2} e^{-s sqrt(h) m} - m^{-1} s sqrt(h) e^{-s sqrt(h) m}),
/// with m = mu_hat(theta).
inline Complex edge_integral_u01(double theta, double s, double h) {
    Complex m = mu_hat(theta);
    Complex m1 = 1.0 / m, m2 = m1 * m1;
    Complex e = std::exp(-s * std::sqrt(h) * m);
    return 2.0 * std::pow(s, -2.0) * (m2 - m2 * e - m1 * s * std::sqrt(h) * e);
}

/// Edge integral of mu * (grad u0) nu over the edge at angle theta of a sector.
/// For the plus edge (nu the outward normal at theta = theta_M) the value is
/// mu (e^{-s sqrt(h) mu_hat} - 1) (i, -1); the minus edge flips the vector.
/// The full elastic traction of u0 equals twice mu (grad u0) nu because the
/// gradient is symmetric and trace-free; all closed forms and probe
/// functionals in this library use the mu-normalized kernel.
inline Vec2c traction_edge_integral(double theta, double s, double h, double mu, EdgeSide side) {
    Complex I(0.0, 1.0);
    Complex e = std::exp(-s * std::sqrt(h) * mu_hat(theta));
    Complex c = mu * (e - 1.0);
    if (side == EdgeSide::plus) return {c * I, -c};
    return {-c * I, c};
}

/// Scalar edge integral int_0^h e^{-sqrt(s r) mu_hat(theta)} dr; decays like s^{-1}.
inline Complex scalar_edge_integral(double theta, double s, double h) {
    Complex m = mu_hat(theta);
    Complex sq = std::sqrt(s) * m;
    Complex e = std::exp(-sq * std::sqrt(h));
    return 2.0 / (sq * sq) * (1.0 - e - sq * std::sqrt(h) * e);
}

/// Scalar edge integral of the normal derivative d u0/d nu along a sector edge.
/// Plus edge: -i (1 - e^{-sqrt(s h) mu_hat(theta)}); minus edge: +i (...).
inline Complex scalar_edge_normal_integral(double theta, double s, double h, EdgeSide side) {
    Complex I(0.0, 1.0);
    Complex e = std::exp(-std::sqrt(s * h) * mu_hat(theta));
    Complex v = 1.0 - e;
    return side == EdgeSide::plus ? -I * v : I * v;
}

// ---------------------------------------------------------------------------
// Quadrature oracles. These never use the closed forms above; they integrate
// the point evaluations directly (with the t = sqrt(r) substitution removing
// the kernels' radial singularity).
// ---------------------------------------------------------------------------

/// Truncation radius R such that the exact tail of the sector integral beyond
/// R is below tail_tol. The tail bound uses
///   int_a^inf t^3 e^{-b t} dt = e^{-a b} (a^3/b + 3a^2/b^2 + 6a/b^3 + 6/b^4).
inline double sector_truncation_radius(double theta_m, double theta_M, double s,
                                       double tail_tol) {
    double delta = sector_decay_constant(theta_m, theta_M);
    double b = s * delta;
    double dtheta = theta_M - theta_m;
    double R = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double a = std::sqrt(R);
        double tail = 2.0 * dtheta * std::exp(-a * b) *
                      (a * a * a / b + 3.0 * a * a / (b * b) + 6.0 * a / (b * b * b) +
                       6.0 / (b * b * b * b));
        if (tail < tail_tol) return R;
        R *= 1.5;
    }
    return R;
}

/// Sector integral of u0's first component by iterated adaptive quadrature
/// over the truncated sector (tail certified below tail_tol).
inline Complex sector_integral_u01_quad(double theta_m, double theta_M, double s,
                                        double tail_tol = 1e-13) {
    double R = sector_truncation_radius(theta_m, theta_M, s, tail_tol);
    double T = std::sqrt(R);
    auto inner = [&](double theta) {
        Complex m = mu_hat(theta);
        auto f = [&](double t) { return 2.0 * t * t * t * std::exp(-s * t * m); };
        return adaptive_gauss16(f, 0.0, T, 1e-11);
    };
    return adaptive_gauss16(inner, theta_m, theta_M, 1e-11);
}

/// Scalar sector integral by quadrature; sqrt(s)-scaled kernel.
inline Complex scalar_sector_integral_quad(double theta_m, double theta_M, double s,
                                           double tail_tol = 1e-13) {
    // Same integrand family with s replaced by sqrt(s).
    double R = sector_truncation_radius(theta_m, theta_M, std::sqrt(s), tail_tol);
    double T = std::sqrt(R);
    auto inner = [&](double theta) {
        Complex m = mu_hat(theta);
        auto f = [&](double t) { return 2.0 * t * t * t * std::exp(-std::sqrt(s) * t * m); };
        return adaptive_gauss16(f, 0.0, T, 1e-11);
    };
    return adaptive_gauss16(inner, theta_m, theta_M, 1e-11);
}

/// Edge integral of the first CGO component by quadrature of cgo_eval.
inline Complex edge_integral_u01_quad(double theta, double s, double h) {
    Vec2 dir(std::cos(theta), std::sin(theta));
    auto f = [&](double r) { return cgo_eval(dir * r, s)[0]; };
    return integrate_radial(f, h, 1e-11);
}

/// Edge integral of mu (grad u0) nu by quadrature of cgo_grad.
inline Vec2c traction_edge_integral_quad(double theta, double s, double h, double mu,
                                         EdgeSide side) {
    Vec2 dir(std::cos(theta), std::sin(theta));
    Vec2 nu = side == EdgeSide::plus ? perp(dir) : -perp(dir);
    auto f0 = [&](double r) {
        Mat2c g = cgo_grad(dir * r, s);
        return mu * (g[0][0] * nu.x + g[0][1] * nu.y);
    };
    auto f1 = [&](double r) {
        Mat2c g = cgo_grad(dir * r, s);
        return mu * (g[1][0] * nu.x + g[1][1] * nu.y);
    };
    return {integrate_radial(f0, h, 1e-11), integrate_radial(f1, h, 1e-11)};
}

inline Complex scalar_edge_integral_quad(double theta, double s, double h) {
    Vec2 dir(std::cos(theta), std::sin(theta));
    auto f = [&](double r) { return cgo_scalar_eval(dir * r, s); };
    return integrate_radial(f, h, 1e-11);
}

inline Complex scalar_edge_normal_integral_quad(double theta, double s, double h, EdgeSide side) {
    Vec2 dir(std::cos(theta), std::sin(theta));
    Vec2 nu = side == EdgeSide::plus ? perp(dir) : -perp(dir);
    auto f = [&](double r) {
        Vec2c g = cgo_scalar_grad(dir * r, s);
        return g[0] * nu.x + g[1] * nu.y;
    };
    return integrate_radial(f, h, 1e-11);
}

/// Weighted absolute sector integral int |u0_1| |x|^alpha dx over the full
/// sector, reduced exactly in r and integrated in theta:
/// int_0^inf r^{1+alpha} e^{-c sqrt(r)} dr = 2 Gamma(2 alpha + 4) / c^{2 alpha + 4}.
inline double weighted_sector_l1(double theta_m, double theta_M, double alpha, double s) {
    auto f = [&](double theta) {
        double c = s * std::cos(0.5 * theta);
        return 2.0 * std::tgamma(2.0 * alpha + 4.0) / std::pow(c, 2.0 * alpha + 4.0);
    };
    return adaptive_gauss16(f, theta_m, theta_M, 1e-11);
}

/// Upper bound for weighted_sector_l1: 2 (theta_M - theta_m) Gamma(2 alpha + 4)
/// delta^{-(2 alpha + 4)} s^{-(2 alpha + 4)}.
inline double weighted_sector_l1_bound(double theta_m, double theta_M, double alpha, double s) {
    double delta = sector_decay_constant(theta_m, theta_M);
    return 2.0 * (theta_M - theta_m) * std::tgamma(2.0 * alpha + 4.0) /
           std::pow(delta, 2.0 * alpha + 4.0) * std::pow(s, -(2.0 * alpha + 4.0));
}

/// Truncated-edge weighted integral int_0^h r^alpha e^{-s sqrt(r) omega} dr;
/// decays like s^{-(2 alpha + 2)} for omega > 0.
inline double weighted_edge_integral(double alpha, double s, double h, double omega) {
    auto f = [&](double r) { return std::pow(r, alpha) * std::exp(-s * std::sqrt(r) * omega); };
    return integrate_radial(f, h, 1e-11);
}

// ---------------------------------------------------------------------------
// Bounds report for the truncated-sector L2 norms.
// ---------------------------------------------------------------------------
struct H1BoundsReport {
    double s = 0.0;
    double alpha = 0.0;
    double l2_norm = 0.0;            // ||u0||_{L2(C_h)}
    double l2_plain_bound = 0.0;     // sqrt(theta_M - theta_m)
    double implied_Theta = 0.0;      // Theta solving l2 = bound * e^{-s sqrt(Theta) h}
    bool implied_Theta_in_range = false;  // Theta in [0, h]
    double weighted_l2 = 0.0;        // || |x|^alpha u0 ||_{L2(C_h)}
    double weighted_l2_bound = 0.0;
    bool weighted_ok = false;
    double weighted_l1 = 0.0;        // int |u0||x|^alpha over the full sector
    double weighted_l1_bound = 0.0;
    bool l1_ok = false;

    bool all_ok() const { return implied_Theta_in_range && weighted_ok && l1_ok; }
};

/// Evaluates the truncated-sector norms of the vector CGO solution by
/// quadrature and compares them against their closed-form upper bounds.
inline H1BoundsReport h1_bounds_check(const SectorSpec& spec, double s, double alpha) {
    spec.validate();
    double dtheta = spec.opening();
    double delta = sector_decay_constant(spec.theta_m, spec.theta_M);

    H1BoundsReport rep;
    rep.s = s;
    rep.alpha = alpha;

    auto inner_l2 = [&](double theta) {
        double c = 2.0 * s * std::cos(0.5 * theta);
        auto f = [&](double r) { return r * std::exp(-c * std::sqrt(r)); };
        return integrate_radial(f, spec.h, 1e-11);
    };
    double l2sq = adaptive_gauss16(inner_l2, spec.theta_m, spec.theta_M, 1e-10);
    rep.l2_norm = std::sqrt(std::max(0.0, l2sq));
    rep.l2_plain_bound = std::sqrt(dtheta);
    if (rep.l2_norm > 0.0 && rep.l2_norm <= rep.l2_plain_bound) {
        double root = std::log(rep.l2_plain_bound / rep.l2_norm) / (s * spec.h);
        rep.implied_Theta = root * root;
        rep.implied_Theta_in_range = rep.implied_Theta >= 0.0 && rep.implied_Theta <= spec.h;
    }

    auto inner_w = [&](double theta) {
        double c = 2.0 * s * std::cos(0.5 * theta);
        auto f = [&](double r) { return std::pow(r, 2.0 * alpha + 1.0) * std::exp(-c * std::sqrt(r)); };
        return integrate_radial(f, spec.h, 1e-11);
    };
    double wsq = adaptive_gauss16(inner_w, spec.theta_m, spec.theta_M, 1e-10);
    rep.weighted_l2 = std::sqrt(std::max(0.0, wsq));
    rep.weighted_l2_bound = std::pow(s, -2.0 * (alpha + 1.0)) * 2.0 *
                            std::sqrt(dtheta * std::tgamma(4.0 * alpha + 4.0)) /
                            std::pow(2.0 * delta, 2.0 * alpha + 2.0);
    rep.weighted_ok = rep.weighted_l2 <= rep.weighted_l2_bound * (1.0 + 1e-9);

    rep.weighted_l1 = weighted_sector_l1(spec.theta_m, spec.theta_M, alpha, s);
    rep.weighted_l1_bound = weighted_sector_l1_bound(spec.theta_m, spec.theta_M, alpha, s);
    rep.l1_ok = rep.weighted_l1 <= rep.weighted_l1_bound * (1.0 + 1e-9);

    return rep;
}

/// Least-squares slope of log|v| against log s. Used for decay-rate checks.
inline double log_log_slope(const std::vector<double>& s, const std::vector<double>& v) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::log(s[i]);
        double y = std::log(std::max(v[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace faultlab
