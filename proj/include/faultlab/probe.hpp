#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faultlab/cgo.hpp"
#include "faultlab/elasticity.hpp"
#include "faultlab/geometry.hpp"
#include "faultlab/jumps.hpp"
#include "faultlab/quadrature.hpp"
#include "faultlab/solve.hpp"

namespace faultlab {

enum class Verdict { holds, violated, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::violated: return "violated";
        default: return "inconclusive";
    }
}

/// Reflection relating the traction-jump values on the two edges of a corner
/// with opening dtheta: [[-cos, -sin], [-sin, +cos]].
struct WMatrix {
    double dtheta = 0.0;
    Mat2 m{{{0.0, 0.0}, {0.0, 0.0}}};

    Vec2 apply(const Vec2& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y};
    }
};

inline WMatrix w_matrix(double dtheta) {
    if (!(dtheta > 0.0 && dtheta < M_PI))
        throw Error(ErrorKind::validation, "corner opening must lie in (0, pi)");
    WMatrix w;
    w.dtheta = dtheta;
    double c = std::cos(dtheta), s = std::sin(dtheta);
    w.m = {{{-c, -s}, {-s, c}}};
    return w;
}

// ---------------------------------------------------------------------------
// Cauchy data attached to a corner frame. Edge traces are parameterized by
// arc length from the vertex; vector values are in world coordinates.
// g traces follow the sector-exterior normal convention on both edges.
// ---------------------------------------------------------------------------

using EdgeFn = std::function<Vec2c(double)>;           // r in (0, h] -> value
using ArcFn = std::function<Vec2c(double)>;            // theta -> value on the arc r = h

struct CornerCauchyData {
    CornerFrame frame;
    EdgeFn f_plus, g_plus;    // data on the theta_M edge
    EdgeFn f_minus, g_minus;  // data on the theta_m edge
    // Optional arc data for the reciprocity check: field difference (v - w)
    // and its full traction with radial normal on the arc r = h.
    std::optional<ArcFn> arc_value;
    std::optional<ArcFn> arc_traction;
    double alpha = 0.5;
    double beta = 0.5;
    bool grad_f_zero_declared = false;
    bool has_imaginary_part = false;

    Vec2c f_vertex(EdgeSide side) const {
        return side == EdgeSide::plus ? f_plus(1e-12 * frame.h) : f_minus(1e-12 * frame.h);
    }
    Vec2c g_vertex(EdgeSide side) const {
        return side == EdgeSide::plus ? g_plus(1e-12 * frame.h) : g_minus(1e-12 * frame.h);
    }
};

namespace probe_detail {

inline EdgeFn interpolate_samples(std::vector<double> rs, std::vector<Vec2c> vals) {
    if (rs.size() != vals.size() || rs.size() < 8)
        throw Error(ErrorKind::validation,
                    "corner edge data needs at least 8 ordered samples per edge");
    for (std::size_t i = 0; i + 1 < rs.size(); ++i)
        if (!(rs[i + 1] > rs[i]))
            throw Error(ErrorKind::validation, "edge samples must be ordered from the vertex");
    return [rs = std::move(rs), vals = std::move(vals)](double r) -> Vec2c {
        if (r <= rs.front()) return vals.front();
        if (r >= rs.back()) return vals.back();
        auto it = std::upper_bound(rs.begin(), rs.end(), r);
        std::size_t i = static_cast<std::size_t>(it - rs.begin());
        double w = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
        return {vals[i - 1][0] * (1.0 - w) + vals[i][0] * w,
                vals[i - 1][1] * (1.0 - w) + vals[i][1] * w};
    };
}

struct Channel {
    bool imaginary = false;
    Vec2 take(const Vec2c& v) const {
        return imaginary ? Vec2{v[0].imag(), v[1].imag()} : Vec2{v[0].real(), v[1].real()};
    }
};

// mu * (grad u0) nu along a sector edge; the closed-form kernel of the probe.
inline Vec2c edge_traction_kernel(double theta, double r, double s, double mu, EdgeSide side) {
    Complex mh = mu_hat(theta);
    Complex pref = -(mu * s / (2.0 * std::sqrt(r))) * std::exp(-s * std::sqrt(r) * mh) *
                   std::polar(1.0, 0.5 * theta);
    Complex I(0.0, 1.0);
    Vec2c v{pref * I, -pref};
    if (side == EdgeSide::minus) return {-v[0], -v[1]};
    return v;
}

inline Vec2c edge_u0(double theta, double r, double s) {
    Complex e = std::exp(-s * std::sqrt(r) * mu_hat(theta));
    return {e, Complex(0.0, 1.0) * e};
}

}  // namespace probe_detail

/// Rotates the frame and the vector data by phi (used by canonicalization and
/// by the rotation-equivariance tests).
inline CornerCauchyData rotate_corner_data(const CornerCauchyData& d, double phi) {
    CornerCauchyData out = d;
    out.frame.theta_m += phi;
    out.frame.theta_M += phi;
    out.frame.x_c = rotate(d.frame.x_c, phi);
    double c = std::cos(phi), s = std::sin(phi);
    auto rot = [c, s](const Vec2c& v) -> Vec2c {
        return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
    };
    auto wrap_edge = [rot](const EdgeFn& f) -> EdgeFn {
        if (!f) return f;
        return [f, rot](double r) { return rot(f(r)); };
    };
    out.f_plus = wrap_edge(d.f_plus);
    out.g_plus = wrap_edge(d.g_plus);
    out.f_minus = wrap_edge(d.f_minus);
    out.g_minus = wrap_edge(d.g_minus);
    if (d.arc_value) {
        ArcFn av = *d.arc_value;
        out.arc_value = [av, rot, phi](double theta) { return rot(av(theta - phi)); };
    }
    if (d.arc_traction) {
        ArcFn at = *d.arc_traction;
        out.arc_traction = [at, rot, phi](double theta) { return rot(at(theta - phi)); };
    }
    return out;
}

namespace probe_detail {

// Canonical position: sector symmetric about the positive x-axis, clear of
// the branch cut.
inline CornerCauchyData canonicalize(const CornerCauchyData& d) {
    double mid = 0.5 * (d.frame.theta_m + d.frame.theta_M);
    return rotate_corner_data(d, -mid);
}

}  // namespace probe_detail

/// Reciprocity residual of the corner data at decay parameter s: the edge
/// integrals of (g . u0 - f . T u0) plus the arc integral of
/// (T(v-w) . u0 - T u0 . (v-w)) with all normals exterior to the sector.
/// Zero (to quadrature accuracy) whenever the data comes from a pair of
/// elastic equilibria in the sector. Uses the full traction 2 mu (grad u0) nu.
inline Complex identity_lhs(const CornerCauchyData& data, double s, const LameParams& params) {
    if (!data.arc_value || !data.arc_traction)
        throw Error(ErrorKind::validation, "reciprocity check needs arc data on the probe circle");
    CornerCauchyData d = probe_detail::canonicalize(data);
    const double h = d.frame.h;
    const double tm = d.frame.theta_m, tM = d.frame.theta_M;
    const double mu = params.mu;

    auto edge_term = [&](double theta, EdgeSide side, const EdgeFn& f, const EdgeFn& g) {
        auto integrand = [&](double r) -> Complex {
            Vec2c u0 = probe_detail::edge_u0(theta, r, s);
            Vec2c Tu0 = probe_detail::edge_traction_kernel(theta, r, s, mu, side);
            Vec2c fv = f(r), gv = g(r);
            // Full traction is twice the mu-normalized kernel.
            return dot_bilinear(gv, u0) - 2.0 * dot_bilinear(fv, Tu0);
        };
        return integrate_radial(integrand, h, 1e-11);
    };

    Complex edges = edge_term(tM, EdgeSide::plus, d.f_plus, d.g_plus) +
                    edge_term(tm, EdgeSide::minus, d.f_minus, d.g_minus);

    auto arc_integrand = [&](double theta) -> Complex {
        Vec2 x{h * std::cos(theta), h * std::sin(theta)};
        Vec2 nu{std::cos(theta), std::sin(theta)};
        Vec2c u0 = cgo_eval(x, s);
        Mat2c g0 = cgo_grad(x, s);
        Vec2c Tu0{2.0 * mu * (g0[0][0] * nu.x + g0[0][1] * nu.y),
                  2.0 * mu * (g0[1][0] * nu.x + g0[1][1] * nu.y)};
        Vec2c pv = (*d.arc_value)(theta);
        Vec2c tp = (*d.arc_traction)(theta);
        return dot_bilinear(tp, u0) - dot_bilinear(pv, Tu0);
    };
    Complex arc = adaptive_gauss16(arc_integrand, tm, tM, 1e-11) * h;

    return edges + arc;
}

// ---------------------------------------------------------------------------
// Asymptotic fits.
// ---------------------------------------------------------------------------

struct DecayFit {
    Complex constant{};   // fitted limit a of y(s) = a + b s^{-gamma}
    Complex slope_coef{};  // b
    double gamma = 0.0;
    double residual = 0.0;        // rms misfit of the model
    double remainder_slope = 0.0;  // log-log slope of |y - a|
};

/// Fits y(s) ~ a + b s^{-gamma}. The model is fitted on the upper part of the
/// grid (where exponentially decaying transients are negligible); the
/// remainder slope diagnostic uses the whole grid.
inline DecayFit fit_decay_model(const std::vector<double>& s, const std::vector<Complex>& y) {
    std::size_t tail = std::max<std::size_t>(5, s.size() / 2);
    if (tail > s.size()) tail = s.size();
    std::size_t first = s.size() - tail;

    double ymax = 0.0;
    for (const auto& v : y) ymax = std::max(ymax, std::abs(v));
    if (ymax < 1e-280) {
        DecayFit flat;
        flat.gamma = 1.0;
        flat.remainder_slope = -1.0;
        return flat;
    }

    auto solve_for_gamma = [&](double gamma, Complex& a, Complex& b) {
        double n = static_cast<double>(s.size() - first);
        double sx = 0, sxx = 0;
        Complex sy{}, sxy{};
        for (std::size_t i = first; i < s.size(); ++i) {
            double x = std::pow(s[i], -gamma);
            sx += x;
            sxx += x * x;
            sy += y[i];
            sxy += x * y[i];
        }
        double det = n * sxx - sx * sx;
        a = (sxx * sy - sx * sxy) / det;
        b = (n * sxy - sx * sy) / det;
        double r = 0.0;
        for (std::size_t i = first; i < s.size(); ++i) {
            Complex e = y[i] - a - b * std::pow(s[i], -gamma);
            r += std::norm(e);
        }
        return std::sqrt(r / n);
    };

    DecayFit best;
    best.residual = std::numeric_limits<double>::infinity();
    for (double gamma = 0.25; gamma <= 6.01; gamma += 0.25) {
        Complex a, b;
        double r = solve_for_gamma(gamma, a, b);
        if (r < best.residual) best = {a, b, gamma, r, 0.0};
    }
    // Local refinement around the best exponent.
    double lo = std::max(0.05, best.gamma - 0.25), hi = best.gamma + 0.25;
    for (int it = 0; it < 40; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        Complex a1, b1, a2, b2;
        double r1 = solve_for_gamma(m1, a1, b1);
        double r2 = solve_for_gamma(m2, a2, b2);
        if (r1 < r2) {
            hi = m2;
            if (r1 < best.residual) best = {a1, b1, m1, r1, 0.0};
        } else {
            lo = m1;
            if (r2 < best.residual) best = {a2, b2, m2, r2, 0.0};
        }
    }

    std::vector<double> mags;
    mags.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) mags.push_back(std::abs(y[i] - best.constant));
    best.remainder_slope = log_log_slope(s, mags);
    return best;
}

// ---------------------------------------------------------------------------
// Probe functional and extraction stages.
// ---------------------------------------------------------------------------

struct ProbeTolerances {
    double f_tol = 1e-4;
    double g_tol = 1e-4;
};

inline std::vector<double> default_s_grid(double s0 = 5.0, double s1 = 80.0, int n = 12) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = s0 * std::pow(s1 / s0, double(i) / (n - 1));
    return g;
}

/// Boundary-data functional of the corner identity at decay parameter s for
/// one real channel: sum over both edges of int (f . [mu grad u0 nu] - g . u0).
/// Its s -> infinity limit is -mu [i, -1] . (f_plus(0) - f_minus(0)).
inline Complex probe_functional(const CornerCauchyData& canonical, double s, double mu,
                                probe_detail::Channel ch) {
    const auto& d = canonical;
    auto edge_term = [&](double theta, EdgeSide side, const EdgeFn& f, const EdgeFn& g) {
        auto integrand = [&](double r) -> Complex {
            Vec2 fv = ch.take(f(r));
            Vec2 gv = ch.take(g(r));
            Vec2c u0 = probe_detail::edge_u0(theta, r, s);
            Vec2c K = probe_detail::edge_traction_kernel(theta, r, s, mu, side);
            return (fv.x * K[0] + fv.y * K[1]) - (gv.x * u0[0] + gv.y * u0[1]);
        };
        return integrate_radial(integrand, d.frame.h, 1e-11);
    };
    return edge_term(d.frame.theta_M, EdgeSide::plus, d.f_plus, d.g_plus) +
           edge_term(d.frame.theta_m, EdgeSide::minus, d.f_minus, d.g_minus);
}

struct FMismatchResult {
    std::vector<double> s_grid;
    std::vector<Complex> values_re, values_im;  // probe functional per s
    Complex fitted_re{}, fitted_im{};           // fitted constants
    Complex mismatch_re{}, mismatch_im{};       // estimates of [i,-1] . (f+ - f-)
    double remainder_slope = 0.0;
    Verdict verdict = Verdict::inconclusive;
    double margin = 0.0;  // |fit| / tolerance scale
};

namespace probe_detail {

inline Verdict combine(Verdict a, Verdict b) {
    if (a == Verdict::violated || b == Verdict::violated) return Verdict::violated;
    if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
    return Verdict::holds;
}

}  // namespace probe_detail

/// Evaluates the probe functional over the s-grid, fits the constant term,
/// and decides whether the displacement jump is continuous at the vertex.
inline FMismatchResult extract_f_mismatch(const CornerCauchyData& data,
                                          const std::vector<double>& s_grid, double mu,
                                          double f_tol = 1e-4) {
    if (s_grid.size() < 5)
        throw Error(ErrorKind::validation, "s-grid needs at least 5 increasing values");
    for (std::size_t i = 0; i + 1 < s_grid.size(); ++i)
        if (!(s_grid[i + 1] > s_grid[i]))
            throw Error(ErrorKind::validation, "s-grid must be increasing");

    CornerCauchyData d = probe_detail::canonicalize(data);
    FMismatchResult res;
    res.s_grid = s_grid;

    double fscale = 1.0;
    {
        double m = 0.0;
        for (double r : {0.1 * d.frame.h, 0.5 * d.frame.h, d.frame.h}) {
            for (const auto& f : {d.f_plus, d.f_minus}) {
                Vec2c v = f(r);
                m = std::max({m, std::abs(v[0]), std::abs(v[1])});
            }
        }
        fscale = 1.0 + m;
    }

    auto run_channel = [&](bool imag, std::vector<Complex>& vals, Complex& fit, Complex& mis,
                           Verdict& verdict) {
        probe_detail::Channel ch{imag};
        vals.clear();
        for (double s : s_grid) vals.push_back(probe_functional(d, s, mu, ch));
        DecayFit df = fit_decay_model(s_grid, vals);
        fit = df.constant;
        mis = -df.constant / mu;
        res.remainder_slope = df.remainder_slope;
        if (df.remainder_slope >= 0.0 && std::abs(df.slope_coef) > 1e-10 * fscale) {
            verdict = Verdict::inconclusive;
            return;
        }
        verdict = std::abs(fit) <= f_tol * fscale ? Verdict::holds : Verdict::violated;
    };

    Verdict v_re = Verdict::holds, v_im = Verdict::holds;
    run_channel(false, res.values_re, res.fitted_re, res.mismatch_re, v_re);
    if (data.has_imaginary_part)
        run_channel(true, res.values_im, res.fitted_im, res.mismatch_im, v_im);
    res.verdict = data.has_imaginary_part ? probe_detail::combine(v_re, v_im) : v_re;
    res.margin = std::max(std::abs(res.fitted_re), std::abs(res.fitted_im)) / (f_tol * fscale);
    return res;
}

struct GRelationResult {
    std::vector<double> s_grid;
    std::vector<Complex> scaled_re, scaled_im;  // s^2-scaled functional per s
    Complex fitted_re{}, fitted_im{};
    double residual = 0.0;  // || g+(0) - W~ g-(0) || extracted from the fit
    double remainder_slope = 0.0;
    Verdict verdict = Verdict::inconclusive;
};

/// Fits the s^2-scaled identity limit and converts it into the residual of
/// the traction relation at the vertex. The fitted constant equals
/// -2 e^{-i theta_M} (g+(0) + e^{i dtheta} g-(0)) per channel (hat vectors),
/// so half its magnitude is the Euclidean residual of the vertex relation.
/// Requires a prior "holds" verdict for the displacement stage and declared
/// vanishing tangential gradients of f at the vertex.
inline GRelationResult extract_g_relation(const CornerCauchyData& data,
                                          const std::vector<double>& s_grid,
                                          const LameParams& params,
                                          const FMismatchResult& f_stage, double g_tol = 1e-4) {
    if (f_stage.verdict != Verdict::holds)
        throw Error(ErrorKind::validation,
                    "traction-relation stage requires the displacement stage to hold");
    if (!data.grad_f_zero_declared)
        throw Error(ErrorKind::validation,
                    "traction-relation stage requires declared zero f-gradients at the vertex");

    CornerCauchyData d = probe_detail::canonicalize(data);
    GRelationResult res;
    res.s_grid = s_grid;

    double gscale = 1.0;
    {
        double m = 0.0;
        for (double r : {0.1 * d.frame.h, 0.5 * d.frame.h, d.frame.h}) {
            for (const auto& g : {d.g_plus, d.g_minus}) {
                Vec2c v = g(r);
                m = std::max({m, std::abs(v[0]), std::abs(v[1])});
            }
        }
        gscale = 1.0 + m;
    }

    auto run_channel = [&](bool imag, std::vector<Complex>& vals, Complex& fit) {
        probe_detail::Channel ch{imag};
        vals.clear();
        for (double s : s_grid)
            vals.push_back(s * s * probe_functional(d, s, params.mu, ch));
        DecayFit df = fit_decay_model(s_grid, vals);
        fit = df.constant;
        res.remainder_slope = df.remainder_slope;
    };

    run_channel(false, res.scaled_re, res.fitted_re);
    if (data.has_imaginary_part) run_channel(true, res.scaled_im, res.fitted_im);

    double r_re = 0.5 * std::abs(res.fitted_re);
    double r_im = data.has_imaginary_part ? 0.5 * std::abs(res.fitted_im) : 0.0;
    res.residual = std::max(r_re, r_im);
    res.verdict = res.residual <= g_tol * gscale ? Verdict::holds : Verdict::violated;
    return res;
}

// ---------------------------------------------------------------------------
// Builders for common data sources.
// ---------------------------------------------------------------------------

/// Data realized by two analytic elastic fields on the sector: f = (v - w) on
/// the edges, g its full traction with sector-exterior normals, plus arc data.
inline CornerCauchyData corner_data_from_fields(const CornerFrame& frame, const AnalyticField& v,
                                                const AnalyticField& w, const LameParams& params) {
    CornerCauchyData d;
    d.frame = frame;
    Vec2 xc = frame.x_c;
    auto diff_value = [v, w, xc](const Vec2& rel) -> Vec2c {
        Vec2 x = xc + rel;
        Vec2c a = v.value(x), b = w.value(x);
        return {a[0] - b[0], a[1] - b[1]};
    };
    auto diff_traction = [v, w, params, xc](const Vec2& rel, const Vec2& nu) -> Vec2c {
        Vec2 x = xc + rel;
        Mat2c gv = v.grad(x), gw = w.grad(x);
        Mat2c g{{{gv[0][0] - gw[0][0], gv[0][1] - gw[0][1]},
                 {gv[1][0] - gw[1][0], gv[1][1] - gw[1][1]}}};
        return traction_c(g, params, nu);
    };

    Vec2 dM{std::cos(frame.theta_M), std::sin(frame.theta_M)};
    Vec2 dm{std::cos(frame.theta_m), std::sin(frame.theta_m)};
    Vec2 nM = perp(dM);
    Vec2 nm = -perp(dm);
    d.f_plus = [diff_value, dM](double r) { return diff_value(dM * r); };
    d.f_minus = [diff_value, dm](double r) { return diff_value(dm * r); };
    d.g_plus = [diff_traction, dM, nM](double r) { return diff_traction(dM * r, nM); };
    d.g_minus = [diff_traction, dm, nm](double r) { return diff_traction(dm * r, nm); };
    double h = frame.h;
    d.arc_value = [diff_value, h](double theta) {
        return diff_value(Vec2{h * std::cos(theta), h * std::sin(theta)});
    };
    d.arc_traction = [diff_traction, h](double theta) {
        Vec2 nu{std::cos(theta), std::sin(theta)};
        return diff_traction(Vec2{h * std::cos(theta), h * std::sin(theta)}, nu);
    };
    return d;
}

/// Synthetic data with prescribed constant edge traces.
inline CornerCauchyData corner_data_constant(const CornerFrame& frame, const Vec2& f_plus,
                                             const Vec2& f_minus, const Vec2& g_plus,
                                             const Vec2& g_minus) {
    CornerCauchyData d;
    d.frame = frame;
    auto cf = [](const Vec2& v) -> EdgeFn {
        return [v](double) { return Vec2c{Complex(v.x), Complex(v.y)}; };
    };
    d.f_plus = cf(f_plus);
    d.f_minus = cf(f_minus);
    d.g_plus = cf(g_plus);
    d.g_minus = cf(g_minus);
    d.grad_f_zero_declared = true;
    return d;
}

/// Builds probe data from a transmission solve at one fault corner: the local
/// difference between the enclosed field and the outside field read through
/// the mesh traces. Edge samples are Chebyshev-clustered toward the vertex.
inline CornerCauchyData corner_data_from_fem(const SolveResult& sol, const Material& material,
                                             const FaultGeometry& fault, const CornerFrame& frame,
                                             int n_samples = 48) {
    const TransmissionMesh& mesh = *sol.u.mesh;
    CornerCauchyData d;
    d.frame = frame;
    d.grad_f_zero_declared = true;

    FieldEvaluator ev(sol.u, material);

    auto edge_fn = [&](std::size_t seg_idx, double ray_theta) {
        Segment seg = fault.segment(seg_idx);
        Vec2 dir{std::cos(ray_theta), std::sin(ray_theta)};
        Vec2 nu_plus = [&] {
            // Plus-ward fault normal on this segment (toward the outside region).
            for (const auto& ie : mesh.interface_edges)
                if (ie.on_fault && ie.segment_id == static_cast<int>(seg_idx))
                    return interface_edge_normal(mesh, ie);
            throw Error(ErrorKind::geometry, "fault segment missing from mesh interface");
        }();
        std::vector<double> rs;
        std::vector<Vec2c> fvals, gvals;
        for (int k = 0; k < n_samples; ++k) {
            double t = (k + 0.5) / n_samples;
            double r = frame.h * 0.5 * (1.0 - std::cos(M_PI * t));  // clustered at the vertex
            if (r < 1e-9 * frame.h) r = 1e-9 * frame.h;
            Vec2 x = frame.x_c + dir * r;
            Vec2 off = nu_plus * (1e-7 * frame.h);
            Vec2 u_in = ev.value(x - off, 1);
            Vec2 u_out = ev.value(x + off, 0);
            Vec2 fv = u_in - u_out;  // difference field: enclosed minus outside
            Mat2 g_in = ev.gradient(x - off, 1);
            Mat2 g_out = ev.gradient(x + off, 0);
            Mat2 dg;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) dg[a][b] = g_in[a][b] - g_out[a][b];
            Vec2 gv = traction(dg, material.base, nu_plus);
            rs.push_back(r);
            fvals.push_back({Complex(fv.x), Complex(fv.y)});
            gvals.push_back({Complex(gv.x), Complex(gv.y)});
        }
        return std::pair{probe_detail::interpolate_samples(rs, fvals),
                         probe_detail::interpolate_samples(std::move(rs), std::move(gvals))};
    };

    auto [fp, gp] = edge_fn(frame.plus_segment, frame.theta_M);
    auto [fm, gm] = edge_fn(frame.minus_segment, frame.theta_m);
    d.f_plus = fp;
    d.g_plus = gp;
    d.f_minus = fm;
    d.g_minus = gm;
    return d;
}

/// Shrinks the probe radius until the ball around the corner meets no fault
/// segment other than the two incident ones.
inline double clear_probe_radius(const FaultGeometry& fault, const CornerFrame& frame) {
    double h = frame.h;
    for (std::size_t s = 0; s < fault.segment_count(); ++s) {
        if (s == frame.plus_segment || s == frame.minus_segment) continue;
        double dmin = point_segment_distance(frame.x_c, fault.segment(s));
        if (dmin < h) h = 0.9 * dmin;
    }
    if (!(h > 0.0))
        throw Error(ErrorKind::geometry, "no clear probe radius at this corner");
    return h;
}

// ---------------------------------------------------------------------------
// Admissibility of (fault, jumps) configurations.
// ---------------------------------------------------------------------------

struct CornerAdmissibility {
    std::size_t vertex = 0;
    bool a1 = false;          // vertex displacement jumps differ
    bool a2 = false;          // continuous f with zero gradients and broken W relation
    bool admissible = false;
    double f_gap = 0.0;       // |f+(xc) - f-(xc)|
    double grad_norm = 0.0;   // max one-sided |df/darc|
    double w_residual = 0.0;  // |g+(xc) - W g-(xc)|
};

struct AdmissibilityReport {
    std::vector<CornerAdmissibility> corners;
    bool admissible = false;  // in the admissible class: every corner passes
};

inline AdmissibilityReport admissibility_check(const FaultGeometry& fault, const JumpData& jumps,
                                               double tol = 1e-10) {
    AdmissibilityReport rep;
    if (fault.frames.empty()) {
        rep.admissible = false;
        return rep;
    }
    double fscale = 1.0 + jumps.max_f_norm();
    double gscale = 1.0 + jumps.max_g_norm();

    for (const auto& [vidx, frame] : fault.frames) {
        CornerAdmissibility ca;
        ca.vertex = vidx;

        auto vertex_t = [&](std::size_t seg) {
            return dist(fault.segment(seg).a, frame.x_c) < 1e-12 ? 0.0 : 1.0;
        };
        double tp = vertex_t(frame.plus_segment);
        double tm = vertex_t(frame.minus_segment);
        Vec2 fp = jumps.f_eval(frame.plus_segment, tp);
        Vec2 fm = jumps.f_eval(frame.minus_segment, tm);
        Vec2 gp = jumps.g_eval(frame.plus_segment, tp);
        Vec2 gm = jumps.g_eval(frame.minus_segment, tm);

        ca.f_gap = norm(fp - fm);
        ca.a1 = ca.f_gap > tol * fscale;
        if (!ca.a1) {
            double Lp = fault.segment(frame.plus_segment).length();
            double Lm = fault.segment(frame.minus_segment).length();
            Vec2 dp = jumps.f.at(frame.plus_segment).deriv(tp, Lp, tp > 0.5);
            Vec2 dm = jumps.f.at(frame.minus_segment).deriv(tm, Lm, tm > 0.5);
            ca.grad_norm = std::max(norm(dp), norm(dm));
            WMatrix W = w_matrix(frame.opening());
            ca.w_residual = norm(gp - W.apply(gm));
            ca.a2 = ca.grad_norm <= tol * fscale && ca.w_residual > tol * gscale;
        }
        ca.admissible = ca.a1 || ca.a2;
        rep.corners.push_back(ca);
    }
    rep.admissible = !rep.corners.empty();
    for (const auto& c : rep.corners) rep.admissible = rep.admissible && c.admissible;
    return rep;
}

// ---------------------------------------------------------------------------
// Full probe report for one corner.
// ---------------------------------------------------------------------------

struct CornerProbeReport {
    std::vector<double> s_grid;
    FMismatchResult f_stage;
    std::optional<GRelationResult> g_stage;
    std::vector<double> identity_residuals;  // when arc data is available
    Verdict overall = Verdict::inconclusive;
};

inline CornerProbeReport run_corner_probe(const CornerCauchyData& data,
                                          const std::vector<double>& s_grid,
                                          const LameParams& params,
                                          const ProbeTolerances& tol = {}) {
    CornerProbeReport rep;
    rep.s_grid = s_grid;
    if (data.arc_value && data.arc_traction) {
        for (double s : s_grid)
            rep.identity_residuals.push_back(std::abs(identity_lhs(data, s, params)));
    }
    rep.f_stage = extract_f_mismatch(data, s_grid, params.mu, tol.f_tol);
    rep.overall = rep.f_stage.verdict;
    if (rep.f_stage.verdict == Verdict::holds && data.grad_f_zero_declared) {
        rep.g_stage = extract_g_relation(data, s_grid, params, rep.f_stage, tol.g_tol);
        rep.overall = rep.g_stage->verdict;
    }
    return rep;
}

}  // namespace faultlab
