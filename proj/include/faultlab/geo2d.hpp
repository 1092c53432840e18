#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace faultlab {

// Error kinds map to CLI exit codes: validation -> 1, numeric/geometry -> 2.
enum class ErrorKind { validation, geometry, numeric, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double c) const { return {x * c, y * c}; }
    Vec2 operator/(double c) const { return {x / c, y / c}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
};

inline Vec2 operator*(double c, const Vec2& v) { return v * c; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }
inline Vec2 normalized(const Vec2& a) {
    double n = norm(a);
    if (n == 0.0) throw Error(ErrorKind::geometry, "cannot normalize zero vector");
    return a / n;
}
// Rotate by +90 degrees (counterclockwise).
inline Vec2 perp(const Vec2& a) { return {-a.y, a.x}; }
inline Vec2 rotate(const Vec2& a, double phi) {
    double c = std::cos(phi), s = std::sin(phi);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
}

struct Segment {
    Vec2 a, b;
    double length() const { return dist(a, b); }
    Vec2 at(double t) const { return a + (b - a) * t; }
    Vec2 direction() const { return normalized(b - a); }
};

inline int orientation_sign(const Vec2& a, const Vec2& b, const Vec2& c, double eps = 1e-14) {
    double v = cross(b - a, c - a);
    double scale = std::max({std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y),
                             std::abs(c.x), std::abs(c.y), 1.0});
    if (std::abs(v) <= eps * scale * scale) return 0;
    return v > 0 ? 1 : -1;
}

inline bool on_segment(const Vec2& p, const Segment& s, double eps = 1e-12) {
    if (orientation_sign(s.a, s.b, p) != 0) return false;
    double t = dot(p - s.a, s.b - s.a);
    double L2 = dot(s.b - s.a, s.b - s.a);
    return t >= -eps * L2 && t <= L2 * (1.0 + eps);
}

// Proper or touching intersection test for closed segments.
inline bool segments_intersect(const Segment& s1, const Segment& s2) {
    int d1 = orientation_sign(s2.a, s2.b, s1.a);
    int d2 = orientation_sign(s2.a, s2.b, s1.b);
    int d3 = orientation_sign(s1.a, s1.b, s2.a);
    int d4 = orientation_sign(s1.a, s1.b, s2.b);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(s1.a, s2)) return true;
    if (d2 == 0 && on_segment(s1.b, s2)) return true;
    if (d3 == 0 && on_segment(s2.a, s1)) return true;
    if (d4 == 0 && on_segment(s2.b, s1)) return true;
    return false;
}

inline double point_segment_distance(const Vec2& p, const Segment& s) {
    Vec2 d = s.b - s.a;
    double L2 = dot(d, d);
    if (L2 == 0.0) return dist(p, s.a);
    double t = std::clamp(dot(p - s.a, d) / L2, 0.0, 1.0);
    return dist(p, s.a + d * t);
}

inline double segment_segment_distance(const Segment& s1, const Segment& s2) {
    if (segments_intersect(s1, s2)) return 0.0;
    return std::min({point_segment_distance(s1.a, s2), point_segment_distance(s1.b, s2),
                     point_segment_distance(s2.a, s1), point_segment_distance(s2.b, s1)});
}

// Even-odd point-in-polygon; the polygon is a closed vertex loop.
inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
    bool inside = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            double xin = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < xin) inside = !inside;
        }
    }
    return inside;
}

inline double polygon_signed_area(const std::vector<Vec2>& poly) {
    double s = 0.0;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) s += cross(poly[j], poly[i]);
    return 0.5 * s;
}

// A closed loop is simple when no two non-adjacent edges meet.
inline bool polygon_is_simple(const std::vector<Vec2>& poly) {
    std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        Segment si{poly[i], poly[(i + 1) % n]};
        if (si.length() == 0.0) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            Segment sj{poly[j], poly[(j + 1) % n]};
            if (segments_intersect(si, sj)) return false;
        }
    }
    return true;
}

inline bool polyline_is_simple(const std::vector<Vec2>& pts) {
    std::size_t n = pts.size();
    if (n < 2) return false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        Segment si{pts[i], pts[i + 1]};
        if (si.length() == 0.0) return false;
        for (std::size_t j = i + 2; j + 1 < n; ++j) {
            Segment sj{pts[j], pts[j + 1]};
            if (j == i + 1) continue;
            if (segments_intersect(si, sj)) {
                // consecutive segments may share their joint vertex
                if (j == i + 1) continue;
                return false;
            }
        }
    }
    return true;
}

inline bool polygon_is_convex(const std::vector<Vec2>& poly) {
    std::size_t n = poly.size();
    if (n < 3) return false;
    int sign = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int s = orientation_sign(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if (s == 0) return false;
        if (sign == 0)
            sign = s;
        else if (s != sign)
            return false;
    }
    return true;
}

inline double polygon_diameter(const std::vector<Vec2>& poly) {
    double d = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, dist(poly[i], poly[j]));
    return d;
}

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a <= -M_PI) a += 2.0 * M_PI;
    return a;
}

}  // namespace faultlab
