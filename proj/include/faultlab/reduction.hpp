#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "faultlab/cgo.hpp"
#include "faultlab/probe.hpp"
#include "faultlab/quadrature.hpp"

namespace faultlab {

using Vec3 = std::array<double, 3>;

/// Smooth nonnegative bump supported on (center - L, center + L); the default
/// profile is exp(-1/(1 - t^2)) rescaled to the support. Zero outside.
struct BumpProfile {
    double center = 0.0;
    double half_width = 1.0;

    double eval(double x3) const {
        double t = (x3 - center) / half_width;
        if (std::abs(t) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - t * t));
    }

    double deriv(double x3) const {
        double t = (x3 - center) / half_width;
        if (std::abs(t) >= 1.0) return 0.0;
        double d = 1.0 - t * t;
        return eval(x3) * (-2.0 * t / (d * d)) / half_width;
    }

    double second_deriv(double x3) const {
        double t = (x3 - center) / half_width;
        if (std::abs(t) >= 1.0) return 0.0;
        double d = 1.0 - t * t;
        // d/dt [-2t/d^2] = (-2 d^2 - (-2t) 2 d (-2t)) / d^4 = (-2 d - 8 t^2 ... ) / d^3
        double inner = (-2.0 * d - 8.0 * t * t) / (d * d * d) + 4.0 * t * t / (d * d * d * d);
        return eval(x3) * inner / (half_width * half_width);
    }

    /// Mass int phi dx3, computed by quadrature (never hard-coded).
    double m0() const {
        auto f = [this](double x) { return eval(x); };
        return adaptive_gauss16(f, center - half_width, center + half_width, 1e-13);
    }

    void validate_inside(double M) const {
        if (!(half_width > 0.0))
            throw Error(ErrorKind::validation, "bump half-width must be positive");
        if (!(center - half_width > -M && center + half_width < M))
            throw Error(ErrorKind::validation,
                        "bump support must lie strictly inside the slab (-M, M)");
    }
};

/// Averages a sampled slab function against the profile:
/// (P h)(x') = int phi(x3) h(x', x3) dx3.
inline double reduce(const BumpProfile& profile, const std::function<double(double)>& h_along_x3) {
    auto f = [&](double x3) { return profile.eval(x3) * h_along_x3(x3); };
    return adaptive_gauss16(f, profile.center - profile.half_width,
                            profile.center + profile.half_width, 1e-12);
}

inline Vec3 reduce3(const BumpProfile& profile, const std::function<Vec3(double)>& h_along_x3) {
    Vec3 out{};
    for (int c = 0; c < 3; ++c)
        out[c] = reduce(profile, [&](double x3) { return h_along_x3(x3)[c]; });
    return out;
}

// ---------------------------------------------------------------------------
// Edge data: three-component jump traces on the two sector edges, stored as
// 2D traces because the data does not depend on the edge coordinate.
// ---------------------------------------------------------------------------

using EdgeTrace3D = std::function<Vec3(double)>;  // arc length r from the vertex

struct EdgeData3D {
    CornerFrame frame;  // in-plane sector at the projected corner
    double M = 1.0;     // slab half-extent
    EdgeTrace3D f_plus, f_minus, g_plus, g_minus;
    double alpha = 0.5, beta = 0.5;
    bool grad_f_zero_declared = false;

    static EdgeTrace3D constant(const Vec3& v) {
        return [v](double) { return v; };
    }
};

/// Scalar corner data for the antiplane stage: out-of-plane displacement jump
/// and its Neumann-type jump q = P(g3) / coefficient.
struct ScalarCornerData {
    CornerFrame frame;
    std::function<Complex(double)> f_plus, f_minus;  // P(f3) traces
    std::function<Complex(double)> q_plus, q_minus;  // scaled traction jumps
    std::optional<std::function<Complex(double)>> arc_value;     // P(v3 - w3) on the arc
    std::optional<std::function<Complex(double)>> arc_normal;    // its radial derivative
    bool grad_f_zero_declared = false;
};

/// Which Laplacian coefficient the antiplane reduction carries. The elastic
/// operator reduces the out-of-plane component to mu Lap'; the alternate
/// lambda variant is selectable for side-by-side comparison.
enum class AntiplaneCoefficient { shear, lambda };

inline double antiplane_coefficient(const LameParams& p, AntiplaneCoefficient c) {
    return c == AntiplaneCoefficient::shear ? p.mu : p.lambda;
}

struct SplitSystems {
    CornerCauchyData in_plane;   // M0-scaled (f^{12}, g^{12}) for the vector probe
    ScalarCornerData antiplane;  // (M0 f3, M0 g3 / coeff) for the scalar probe
    double m0 = 0.0;
};

/// Splits x3-independent edge data into the in-plane elastic problem and the
/// antiplane scalar problem. For stored-2D data the reduction is the exact
/// multiplication by the profile mass.
inline SplitSystems split_systems(const EdgeData3D& data, const BumpProfile& profile,
                                  const LameParams& params,
                                  AntiplaneCoefficient coeff = AntiplaneCoefficient::shear) {
    profile.validate_inside(data.M);
    SplitSystems out;
    out.m0 = profile.m0();
    double m0 = out.m0;
    double ac = antiplane_coefficient(params, coeff);
    if (ac == 0.0)
        throw Error(ErrorKind::validation, "antiplane coefficient must be nonzero");

    CornerCauchyData ip;
    ip.frame = data.frame;
    ip.alpha = data.alpha;
    ip.beta = data.beta;
    ip.grad_f_zero_declared = data.grad_f_zero_declared;
    auto plane = [m0](const EdgeTrace3D& tr) -> EdgeFn {
        return [tr, m0](double r) {
            Vec3 v = tr(r);
            return Vec2c{Complex(m0 * v[0]), Complex(m0 * v[1])};
        };
    };
    ip.f_plus = plane(data.f_plus);
    ip.f_minus = plane(data.f_minus);
    ip.g_plus = plane(data.g_plus);
    ip.g_minus = plane(data.g_minus);
    out.in_plane = ip;

    ScalarCornerData ap;
    ap.frame = data.frame;
    ap.grad_f_zero_declared = data.grad_f_zero_declared;
    auto third = [m0](const EdgeTrace3D& tr, double scale) {
        return [tr, m0, scale](double r) { return Complex(m0 * scale * tr(r)[2]); };
    };
    ap.f_plus = third(data.f_plus, 1.0);
    ap.f_minus = third(data.f_minus, 1.0);
    ap.q_plus = third(data.g_plus, 1.0 / ac);
    ap.q_minus = third(data.g_minus, 1.0 / ac);
    out.antiplane = ap;
    return out;
}

// ---------------------------------------------------------------------------
// Scalar (antiplane) probe built on the sqrt(s r)-decaying harmonic solution.
// ---------------------------------------------------------------------------

namespace scalar_probe_detail {

inline Complex edge_u0(double theta, double r, double s) {
    return std::exp(-std::sqrt(s * r) * mu_hat(theta));
}

// d u0 / d nu along a sector edge with the exterior normal. On the ray at
// angle theta: grad u0 = F'(z) (1, i) with F' = -sqrt(s)/(2 sqrt(z)) u0, and
// (1, i) . perp(dir) = i e^{i theta}.
inline Complex edge_normal_kernel(double theta, double r, double s, EdgeSide side) {
    Complex mh = mu_hat(theta);
    Complex F1 = -std::sqrt(s) / (2.0 * std::sqrt(r) * mh) * std::exp(-std::sqrt(s * r) * mh);
    Complex v = F1 * Complex(0.0, 1.0) * std::polar(1.0, theta);
    return side == EdgeSide::plus ? v : -v;
}

struct ChannelS {
    bool imaginary = false;
    double take(const Complex& v) const { return imaginary ? v.imag() : v.real(); }
};

inline ScalarCornerData canonicalize(const ScalarCornerData& d) {
    double mid = 0.5 * (d.frame.theta_m + d.frame.theta_M);
    ScalarCornerData out = d;
    out.frame.theta_m -= mid;
    out.frame.theta_M -= mid;
    if (d.arc_value) {
        auto av = *d.arc_value;
        out.arc_value = [av, mid](double theta) { return av(theta + mid); };
    }
    if (d.arc_normal) {
        auto an = *d.arc_normal;
        out.arc_normal = [an, mid](double theta) { return an(theta + mid); };
    }
    return out;
}

}  // namespace scalar_probe_detail

/// Green-identity residual for the scalar data: edge integrals of
/// (q u0 - f du0/dnu) plus the arc integral of (dp/dnu u0 - du0/dnu p);
/// vanishes when the data comes from two harmonic functions in the sector.
inline Complex scalar_identity_lhs(const ScalarCornerData& data, double s) {
    if (!data.arc_value || !data.arc_normal)
        throw Error(ErrorKind::validation, "scalar reciprocity check needs arc data");
    ScalarCornerData d = scalar_probe_detail::canonicalize(data);
    double h = d.frame.h;

    auto edge_term = [&](double theta, EdgeSide side, const auto& f, const auto& q) {
        auto integrand = [&](double r) -> Complex {
            Complex u0 = scalar_probe_detail::edge_u0(theta, r, s);
            Complex du0 = scalar_probe_detail::edge_normal_kernel(theta, r, s, side);
            return q(r) * u0 - f(r) * du0;
        };
        return integrate_radial(integrand, h, 1e-11);
    };
    Complex edges = edge_term(d.frame.theta_M, EdgeSide::plus, d.f_plus, d.q_plus) +
                    edge_term(d.frame.theta_m, EdgeSide::minus, d.f_minus, d.q_minus);

    auto arc_integrand = [&](double theta) -> Complex {
        Vec2 x{h * std::cos(theta), h * std::sin(theta)};
        Vec2 nu{std::cos(theta), std::sin(theta)};
        Complex u0 = cgo_scalar_eval(x, s);
        Vec2c g0 = cgo_scalar_grad(x, s);
        Complex du0 = g0[0] * nu.x + g0[1] * nu.y;
        return (*d.arc_normal)(theta)*u0 - (*d.arc_value)(theta)*du0;
    };
    Complex arc = adaptive_gauss16(arc_integrand, d.frame.theta_m, d.frame.theta_M, 1e-11) * h;
    return edges + arc;
}

/// Boundary-data functional of the scalar identity; its limit is
/// -i (f_plus(0) - f_minus(0)), and the s-scaled limit under continuous f
/// with zero gradients is -2 (q+(0) e^{-i theta_M} + q-(0) e^{-i theta_m}).
inline Complex scalar_probe_functional(const ScalarCornerData& canonical, double s,
                                       scalar_probe_detail::ChannelS ch) {
    const auto& d = canonical;
    auto edge_term = [&](double theta, EdgeSide side, const auto& f, const auto& q) {
        auto integrand = [&](double r) -> Complex {
            double fv = ch.take(f(r));
            double qv = ch.take(q(r));
            Complex u0 = scalar_probe_detail::edge_u0(theta, r, s);
            Complex du0 = scalar_probe_detail::edge_normal_kernel(theta, r, s, side);
            return fv * du0 - qv * u0;
        };
        return integrate_radial(integrand, d.frame.h, 1e-11);
    };
    return edge_term(d.frame.theta_M, EdgeSide::plus, d.f_plus, d.q_plus) +
           edge_term(d.frame.theta_m, EdgeSide::minus, d.f_minus, d.q_minus);
}

inline std::vector<double> default_scalar_s_grid(double s0 = 50.0, double s1 = 3200.0,
                                                 int n = 12) {
    return default_s_grid(s0, s1, n);
}

struct ScalarProbeReport {
    std::vector<double> s_grid;
    std::vector<Complex> values;         // functional per s (real channel)
    Complex f_fit{};                     // fitted constant; mismatch = i * fit
    Complex f_mismatch{};                // estimate of f+(0) - f-(0)
    Verdict f_verdict = Verdict::inconclusive;
    std::vector<Complex> scaled_values;  // s * functional
    Complex g_fit{};
    double g_residual = 0.0;  // |q+(0) e^{-i thM} + q-(0) e^{-i thm}|
    Verdict g_verdict = Verdict::inconclusive;
    Verdict overall = Verdict::inconclusive;
};

inline ScalarProbeReport run_scalar_probe(const ScalarCornerData& data,
                                          const std::vector<double>& s_grid, double f_tol = 1e-4,
                                          double g_tol = 1e-6) {
    ScalarCornerData d = scalar_probe_detail::canonicalize(data);
    ScalarProbeReport rep;
    rep.s_grid = s_grid;
    scalar_probe_detail::ChannelS ch{false};

    double fscale = 1.0, qscale = 1.0;
    for (double r : {0.1 * d.frame.h, 0.5 * d.frame.h, d.frame.h}) {
        fscale = std::max({fscale, 1.0 + std::abs(d.f_plus(r)), 1.0 + std::abs(d.f_minus(r))});
        qscale = std::max({qscale, 1.0 + std::abs(d.q_plus(r)), 1.0 + std::abs(d.q_minus(r))});
    }

    for (double s : s_grid) rep.values.push_back(scalar_probe_functional(d, s, ch));
    // The scalar kernels decay in sqrt(s); fit against that variable.
    std::vector<double> sig(s_grid.size());
    for (std::size_t i = 0; i < s_grid.size(); ++i) sig[i] = std::sqrt(s_grid[i]);
    DecayFit f_fit = fit_decay_model(sig, rep.values);
    rep.f_fit = f_fit.constant;
    rep.f_mismatch = Complex(0.0, 1.0) * f_fit.constant;
    rep.f_verdict = std::abs(f_fit.constant) <= f_tol * fscale
                        ? Verdict::holds
                        : (f_fit.remainder_slope >= 0.0 ? Verdict::inconclusive
                                                        : Verdict::violated);
    rep.overall = rep.f_verdict;

    if (rep.f_verdict == Verdict::holds && data.grad_f_zero_declared) {
        for (std::size_t i = 0; i < s_grid.size(); ++i)
            rep.scaled_values.push_back(s_grid[i] * rep.values[i]);
        DecayFit g_fit = fit_decay_model(sig, rep.scaled_values);
        rep.g_fit = g_fit.constant;
        rep.g_residual = 0.5 * std::abs(g_fit.constant);
        rep.g_verdict = rep.g_residual <= g_tol * qscale ? Verdict::holds : Verdict::violated;
        rep.overall = rep.g_verdict;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Combined 3D edge probe.
// ---------------------------------------------------------------------------

struct EdgeProbeReport {
    double m0 = 0.0;
    CornerProbeReport in_plane;
    ScalarProbeReport antiplane;
    Verdict overall = Verdict::inconclusive;
    // Volume forcing diagnostic (populated when field data is supplied).
    std::vector<double> forcing_s;
    std::vector<double> forcing_magnitude;
    double forcing_slope = 0.0;
};

struct EdgeProbeOptions {
    std::vector<double> s_grid = default_s_grid();
    std::vector<double> scalar_s_grid = default_scalar_s_grid();
    ProbeTolerances in_plane_tol{};
    double antiplane_f_tol = 1e-4;
    double antiplane_g_tol = 1e-6;
    AntiplaneCoefficient coefficient = AntiplaneCoefficient::shear;
};

/// Runs the in-plane elastic probe and the antiplane scalar probe on the
/// reduced systems of x3-independent edge data.
inline EdgeProbeReport edge_probe_3d(const EdgeData3D& data, const BumpProfile& profile,
                                     const LameParams& params, const EdgeProbeOptions& opts = {}) {
    SplitSystems split = split_systems(data, profile, params, opts.coefficient);
    EdgeProbeReport rep;
    rep.m0 = split.m0;
    rep.in_plane = run_corner_probe(split.in_plane, opts.s_grid, params, opts.in_plane_tol);
    rep.antiplane = run_scalar_probe(split.antiplane, opts.scalar_s_grid, opts.antiplane_f_tol,
                                     opts.antiplane_g_tol);
    rep.overall = probe_detail::combine(rep.in_plane.overall, rep.antiplane.overall);
    return rep;
}

/// In-plane forcing difference produced by x3-dependent slab fields:
/// -lambda int phi'' (v - w)^{12} + (lambda + mu) int phi' grad'(v3 - w3).
/// Central differences supply the in-plane gradient of the third component.
inline std::function<Vec2(const Vec2&)> forcing_difference_from_fields(
    const BumpProfile& profile, const std::function<Vec3(const Vec2&, double)>& v,
    const std::function<Vec3(const Vec2&, double)>& w, const LameParams& params,
    double fd_step = 1e-5) {
    return [=](const Vec2& xp) -> Vec2 {
        auto diff = [&](const Vec2& q, double x3) -> Vec3 {
            Vec3 a = v(q, x3), b = w(q, x3);
            return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
        };
        auto reduce_dd = [&](int comp) {
            auto f = [&](double x3) { return profile.second_deriv(x3) * diff(xp, x3)[comp]; };
            return adaptive_gauss16(f, profile.center - profile.half_width,
                                    profile.center + profile.half_width, 1e-11);
        };
        Vec2 term1{-params.lambda * reduce_dd(0), -params.lambda * reduce_dd(1)};
        auto reduce_d_grad3 = [&](int axis) {
            auto f = [&](double x3) {
                Vec2 dx = axis == 0 ? Vec2{fd_step, 0.0} : Vec2{0.0, fd_step};
                double hi = diff(xp + dx, x3)[2];
                double lo = diff(xp - dx, x3)[2];
                return profile.deriv(x3) * (hi - lo) / (2.0 * fd_step);
            };
            return adaptive_gauss16(f, profile.center - profile.half_width,
                                    profile.center + profile.half_width, 1e-11);
        };
        Vec2 term2{(params.lambda + params.mu) * reduce_d_grad3(0),
                   (params.lambda + params.mu) * reduce_d_grad3(1)};
        return term1 + term2;
    };
}

/// Evaluates the sector integral of a forcing difference against the vector
/// CGO solution over the s-grid and fits its decay slope.
inline void forcing_decay_diagnostic(EdgeProbeReport& rep, const CornerFrame& frame,
                                     const std::function<Vec2(const Vec2&)>& forcing,
                                     const std::vector<double>& s_grid) {
    double mid = 0.5 * (frame.theta_m + frame.theta_M);
    double tm = frame.theta_m - mid, tM = frame.theta_M - mid;
    double c = std::cos(mid), sn = std::sin(mid);
    rep.forcing_s = s_grid;
    rep.forcing_magnitude.clear();
    for (double s : s_grid) {
        // Polar integration over the truncated sector; forcing is sampled in
        // the original frame and rotated into the canonical one.
        auto inner = [&](double theta) -> Complex {
            auto f = [&](double r) -> Complex {
                Vec2 xc{r * std::cos(theta), r * std::sin(theta)};
                Vec2 xw{c * xc.x - sn * xc.y, sn * xc.x + c * xc.y};
                Vec2 G = forcing(frame.x_c + xw);
                Vec2 Gc{c * G.x + sn * G.y, -sn * G.x + c * G.y};
                Vec2c u0 = cgo_eval(xc, s);
                return (Gc.x * u0[0] + Gc.y * u0[1]) * r;
            };
            return adaptive_gauss16(f, 1e-12, frame.h, 1e-9);
        };
        Complex q = adaptive_gauss16(inner, tm, tM, 1e-8);
        rep.forcing_magnitude.push_back(std::abs(q));
    }
    rep.forcing_slope = log_log_slope(rep.forcing_s, rep.forcing_magnitude);
}

}  // namespace faultlab
