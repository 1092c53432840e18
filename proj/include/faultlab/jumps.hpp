#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "faultlab/geo2d.hpp"
#include "faultlab/geometry.hpp"

namespace faultlab {

/// Trace of a jump field along one fault segment, parameterized by t in [0, 1]
/// from the segment's first vertex. Sampled traces interpolate linearly.
struct SegmentTrace {
    enum class Kind { zero, constant, linear, sampled };
    Kind kind = Kind::zero;
    Vec2 c0, c1;              // constant: c0; linear: ends c0 (t=0) and c1 (t=1)
    std::vector<double> ts;   // sampled: increasing, first 0, last 1
    std::vector<Vec2> values;

    static SegmentTrace zero() { return {}; }
    static SegmentTrace constant(const Vec2& v) {
        SegmentTrace s;
        s.kind = Kind::constant;
        s.c0 = v;
        return s;
    }
    static SegmentTrace linear(const Vec2& a, const Vec2& b) {
        SegmentTrace s;
        s.kind = Kind::linear;
        s.c0 = a;
        s.c1 = b;
        return s;
    }
    static SegmentTrace sampled(std::vector<double> t, std::vector<Vec2> v) {
        SegmentTrace s;
        s.kind = Kind::sampled;
        s.ts = std::move(t);
        s.values = std::move(v);
        if (s.ts.size() != s.values.size() || s.ts.size() < 2)
            throw Error(ErrorKind::validation, "sampled trace needs matching t/value lists");
        return s;
    }

    bool is_zero() const {
        switch (kind) {
            case Kind::zero: return true;
            case Kind::constant: return c0.x == 0.0 && c0.y == 0.0;
            case Kind::linear:
                return c0.x == 0.0 && c0.y == 0.0 && c1.x == 0.0 && c1.y == 0.0;
            case Kind::sampled:
                for (const auto& v : values)
                    if (v.x != 0.0 || v.y != 0.0) return false;
                return true;
        }
        return true;
    }

    Vec2 eval(double t) const {
        switch (kind) {
            case Kind::zero: return {0.0, 0.0};
            case Kind::constant: return c0;
            case Kind::linear: return c0 * (1.0 - t) + c1 * t;
            case Kind::sampled: {
                if (t <= ts.front()) return values.front();
                if (t >= ts.back()) return values.back();
                auto it = std::upper_bound(ts.begin(), ts.end(), t);
                std::size_t i = static_cast<std::size_t>(it - ts.begin());
                double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                return values[i - 1] * (1.0 - w) + values[i] * w;
            }
        }
        return {0.0, 0.0};
    }

    /// One-sided derivative with respect to arc length at parameter t.
    Vec2 deriv(double t, double segment_length, bool from_left) const {
        switch (kind) {
            case Kind::zero: return {0.0, 0.0};
            case Kind::constant: return {0.0, 0.0};
            case Kind::linear: return (c1 - c0) / segment_length;
            case Kind::sampled: {
                std::size_t n = ts.size();
                std::size_t i = 0;
                if (from_left) {
                    while (i + 1 < n && ts[i + 1] < t - 1e-14) ++i;
                    std::size_t j = std::min(i + 1, n - 1);
                    return (values[j] - values[i]) / ((ts[j] - ts[i]) * segment_length);
                }
                while (i + 1 < n && ts[i] < t - 1e-14) ++i;
                std::size_t j = std::min(i + 1, n - 1);
                std::size_t i0 = j > 0 ? j - 1 : 0;
                return (values[j] - values[i0]) / ((ts[j] - ts[i0]) * segment_length);
            }
        }
        return {0.0, 0.0};
    }
};

/// Displacement-jump (f) and traction-jump (g) data over the fault segments,
/// with the sign convention f = u_plus - u_minus and g = T_nu u_plus - T_nu
/// u_minus, nu pointing from the enclosed region outward (plus-ward).
/// Zero data on the closing arc is implicit.
struct JumpData {
    std::vector<SegmentTrace> f;
    std::vector<SegmentTrace> g;
    double alpha = 0.5;  // Holder exponent attached to f
    double beta = 0.5;   // Holder exponent attached to g

    static JumpData zeros(std::size_t segments) {
        JumpData j;
        j.f.assign(segments, SegmentTrace::zero());
        j.g.assign(segments, SegmentTrace::zero());
        return j;
    }

    Vec2 f_eval(std::size_t seg, double t) const { return f.at(seg).eval(t); }
    Vec2 g_eval(std::size_t seg, double t) const { return g.at(seg).eval(t); }

    bool all_zero_f() const {
        for (const auto& s : f)
            if (!s.is_zero()) return false;
        return true;
    }

    bool claims_full_support() const {
        for (const auto& s : f)
            if (s.is_zero()) return false;
        for (const auto& s : g)
            if (s.is_zero()) return false;
        return true;
    }

    void validate(const FaultGeometry& fault) const {
        if (f.size() != fault.segment_count() || g.size() != fault.segment_count())
            throw Error(ErrorKind::validation,
                        "jump data must provide one f and one g trace per fault segment");
        if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
            throw Error(ErrorKind::validation, "Holder exponents must lie in (0, 1)");
        if (!fault.closed) {
            // Explicit traces must vanish at the open-fault endpoints; constant
            // traces are tapered to zero over the endpoint mesh cell instead.
            auto endpoint_value = [&](const SegmentTrace& s, double t) {
                if (s.kind == SegmentTrace::Kind::constant) return Vec2{0.0, 0.0};
                return s.eval(t);
            };
            Vec2 v0 = endpoint_value(f.front(), 0.0);
            Vec2 v1 = endpoint_value(f.back(), 1.0);
            if (norm(v0) > 0.0 || norm(v1) > 0.0)
                throw Error(ErrorKind::validation,
                            "displacement jump must vanish at open-fault endpoints");
        }
    }

    JumpData operator+(const JumpData& o) const {
        JumpData out = *this;
        auto add_trace = [](const SegmentTrace& a, const SegmentTrace& b) {
            if (a.kind == SegmentTrace::Kind::zero) return b;
            if (b.kind == SegmentTrace::Kind::zero) return a;
            auto endv = [](const SegmentTrace& s, double t) { return s.eval(t); };
            if ((a.kind == SegmentTrace::Kind::sampled) || (b.kind == SegmentTrace::Kind::sampled))
                throw Error(ErrorKind::validation, "sampled traces cannot be added");
            if (a.kind == SegmentTrace::Kind::constant && b.kind == SegmentTrace::Kind::constant)
                return SegmentTrace::constant(a.c0 + b.c0);
            return SegmentTrace::linear(endv(a, 0.0) + endv(b, 0.0), endv(a, 1.0) + endv(b, 1.0));
        };
        for (std::size_t i = 0; i < f.size(); ++i) out.f[i] = add_trace(f[i], o.f[i]);
        for (std::size_t i = 0; i < g.size(); ++i) out.g[i] = add_trace(g[i], o.g[i]);
        return out;
    }

    JumpData operator*(double c) const {
        JumpData out = *this;
        auto scale = [&](SegmentTrace& s) {
            s.c0 = s.c0 * c;
            s.c1 = s.c1 * c;
            for (auto& v : s.values) v = v * c;
        };
        for (auto& s : out.f) scale(s);
        for (auto& s : out.g) scale(s);
        return out;
    }

    double max_f_norm() const {
        double m = 0.0;
        for (const auto& s : f) {
            m = std::max({m, norm(s.eval(0.0)), norm(s.eval(0.5)), norm(s.eval(1.0))});
            for (const auto& v : s.values) m = std::max(m, norm(v));
        }
        return m;
    }
    double max_g_norm() const {
        double m = 0.0;
        for (const auto& s : g) {
            m = std::max({m, norm(s.eval(0.0)), norm(s.eval(0.5)), norm(s.eval(1.0))});
            for (const auto& v : s.values) m = std::max(m, norm(v));
        }
        return m;
    }
};

}  // namespace faultlab
