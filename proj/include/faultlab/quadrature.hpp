#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "faultlab/geo2d.hpp"

namespace faultlab {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
struct GaussLegendre16 {
    static constexpr std::array<double, 8> nodes = {
        0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
        0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
    static constexpr std::array<double, 8> weights = {
        0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
};

template <class F>
auto gauss16(const F& f, double a, double b) -> decltype(f(0.0)) {
    using R = decltype(f(0.0));
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    R acc{};
    for (int i = 0; i < 8; ++i) {
        double dx = half * GaussLegendre16::nodes[i];
        acc += GaussLegendre16::weights[i] * (f(mid + dx) + f(mid - dx));
    }
    return acc * half;
}

template <class F>
auto composite_gauss16(const F& f, double a, double b, int panels) -> decltype(f(0.0)) {
    using R = decltype(f(0.0));
    R acc{};
    double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) acc += gauss16(f, a + p * w, a + (p + 1) * w);
    return acc;
}

// Refine panel count until two consecutive levels agree to rel_tol.
template <class F>
auto adaptive_gauss16(const F& f, double a, double b, double rel_tol = 1e-10,
                      int max_panels = 4096) -> decltype(f(0.0)) {
    auto prev = composite_gauss16(f, a, b, 1);
    for (int panels = 2; panels <= max_panels; panels *= 2) {
        auto cur = composite_gauss16(f, a, b, panels);
        double scale = std::abs(cur) + 1e-300;
        if (std::abs(cur - prev) <= rel_tol * scale) return cur;
        prev = cur;
    }
    return prev;
}

// Integral of f(r) over (0, h] where f may behave like r^{-1/2} near 0;
// the substitution t = sqrt(r) gives 2 t f(t^2) which is bounded.
template <class F>
auto integrate_radial(const F& f, double h, double rel_tol = 1e-10) -> decltype(f(1.0)) {
    auto g = [&](double t) { return 2.0 * t * f(t * t); };
    return adaptive_gauss16(g, 0.0, std::sqrt(h), rel_tol);
}

// Arc-length line integral of f along a straight segment.
template <class F>
auto integrate_segment(const F& f, const Segment& seg, double rel_tol = 1e-10)
    -> decltype(f(Vec2{})) {
    double L = seg.length();
    auto g = [&](double t) { return f(seg.at(t)); };
    return adaptive_gauss16(g, 0.0, 1.0, rel_tol) * L;
}

}  // namespace faultlab
