#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "faultlab/geo2d.hpp"

namespace faultlab {

using Mat2 = std::array<std::array<double, 2>, 2>;

/// Isotropic Lame pair. Strong convexity in 2D means mu > 0 and 2 mu + 2 lambda > 0.
struct LameParams {
    double lambda = 1.0;
    double mu = 1.0;

    bool strongly_convex() const { return mu > 0.0 && 2.0 * mu + 2.0 * lambda > 0.0; }

    void validate() const {
        if (!strongly_convex())
            throw Error(ErrorKind::validation,
                        "Lame parameters violate strong convexity (mu > 0, 2 mu + 2 lambda > 0)");
    }
};

/// sigma(grad) = lambda tr(grad) I + mu (grad + grad^T). Symmetric output.
inline Mat2 stress(const Mat2& grad, const LameParams& p) {
    double tr = grad[0][0] + grad[1][1];
    Mat2 s;
    s[0][0] = p.lambda * tr + 2.0 * p.mu * grad[0][0];
    s[1][1] = p.lambda * tr + 2.0 * p.mu * grad[1][1];
    s[0][1] = p.mu * (grad[0][1] + grad[1][0]);
    s[1][0] = s[0][1];
    return s;
}

/// Boundary force density stress(grad) . nu for a unit normal nu.
inline Vec2 traction(const Mat2& grad, const LameParams& p, const Vec2& nu,
                     bool normalize = false) {
    double n = norm(nu);
    Vec2 nn = nu;
    if (std::abs(n - 1.0) > 1e-12) {
        if (!normalize)
            throw Error(ErrorKind::validation, "traction normal must be a unit vector");
        nn = nu / n;
    }
    Mat2 s = stress(grad, p);
    return {s[0][0] * nn.x + s[0][1] * nn.y, s[1][0] * nn.x + s[1][1] * nn.y};
}

/// Action of the elastic operator mu Lap u + (lambda + mu) grad(div u) on an
/// analytic field, by central differences. Test utility for residual checks.
template <class Field>
Vec2 lame_operator_fd(const Field& u, const Vec2& x, const LameParams& p, double step = 1e-5) {
    auto u1 = [&](const Vec2& y) { return u(y).x; };
    auto u2 = [&](const Vec2& y) { return u(y).y; };
    auto dxx = [&](auto&& f) {
        return (f(Vec2{x.x + step, x.y}) - 2.0 * f(x) + f(Vec2{x.x - step, x.y})) / (step * step);
    };
    auto dyy = [&](auto&& f) {
        return (f(Vec2{x.x, x.y + step}) - 2.0 * f(x) + f(Vec2{x.x, x.y - step})) / (step * step);
    };
    auto dxy = [&](auto&& f) {
        return (f(Vec2{x.x + step, x.y + step}) - f(Vec2{x.x + step, x.y - step}) -
                f(Vec2{x.x - step, x.y + step}) + f(Vec2{x.x - step, x.y - step})) /
               (4.0 * step * step);
    };
    double lap1 = dxx(u1) + dyy(u1);
    double lap2 = dxx(u2) + dyy(u2);
    double ddiv1 = dxx(u1) + dxy(u2);
    double ddiv2 = dxy(u1) + dyy(u2);
    return {p.mu * lap1 + (p.lambda + p.mu) * ddiv1, p.mu * lap2 + (p.lambda + p.mu) * ddiv2};
}

}  // namespace faultlab
