#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "faultlab/geo2d.hpp"

namespace faultlab {

enum class BoundaryTag { dirichlet, neumann };

/// Simple closed polygon bounding the elastic body, with a Dirichlet/Neumann
/// tag per boundary edge and an optional observation subset of Neumann edges.
struct DomainPolygon {
    std::vector<Vec2> vertices;            // positively oriented
    std::vector<BoundaryTag> edge_tags;    // edge i joins vertex i and i+1
    std::vector<std::size_t> observation_edges;  // indices into edges, all Neumann

    std::size_t edge_count() const { return vertices.size(); }
    Segment edge(std::size_t i) const {
        return {vertices[i], vertices[(i + 1) % vertices.size()]};
    }
    double diameter() const { return polygon_diameter(vertices); }

    bool is_observation_edge(std::size_t i) const {
        return std::find(observation_edges.begin(), observation_edges.end(), i) !=
               observation_edges.end();
    }

    void validate() const {
        if (vertices.size() < 3)
            throw Error(ErrorKind::validation, "domain polygon needs at least 3 vertices");
        if (!polygon_is_simple(vertices))
            throw Error(ErrorKind::validation, "domain polygon must be simple");
        if (polygon_signed_area(vertices) <= 0.0)
            throw Error(ErrorKind::validation, "domain polygon must be positively oriented");
        if (edge_tags.size() != vertices.size())
            throw Error(ErrorKind::validation,
                        "boundary tags must cover every domain edge exactly once");
        bool any_d = false;
        for (auto t : edge_tags) any_d |= (t == BoundaryTag::dirichlet);
        if (!any_d)
            throw Error(ErrorKind::validation, "at least one Dirichlet edge is required");
        for (auto i : observation_edges) {
            if (i >= edge_tags.size() || edge_tags[i] != BoundaryTag::neumann)
                throw Error(ErrorKind::validation,
                            "observation edges must be Neumann-tagged boundary edges");
        }
    }
};

/// Corner sector attached to an interior fault vertex. The sector
/// theta_m < theta < theta_M (opening in (0, pi)) lies on the enclosed side;
/// the edge at theta_M is the plus edge, the one at theta_m the minus edge.
struct CornerFrame {
    Vec2 x_c;
    double theta_m = 0.0;
    double theta_M = 0.0;
    double h = 0.0;
    std::size_t vertex = 0;
    std::size_t plus_segment = 0;   // incident fault segment along the theta_M ray
    std::size_t minus_segment = 0;  // incident fault segment along the theta_m ray

    double opening() const { return theta_M - theta_m; }
};

enum class ClosureSide { automatic, left, right };

/// Oriented polygonal fault. Open faults must be graphs of piecewise-linear
/// functions in a rotated frame; closed faults must bound a convex polygon.
struct FaultGeometry {
    std::vector<Vec2> vertices;
    bool closed = false;
    ClosureSide side = ClosureSide::automatic;
    std::map<std::size_t, double> h_overrides;  // vertex index -> probe radius

    // Derived at validation time.
    double graph_rotation = 0.0;   // open faults: world = R(graph_rotation) * graph frame
    int resolved_side = +1;        // open faults: +1 = left of travel in graph frame
    std::map<std::size_t, CornerFrame> frames;

    std::size_t segment_count() const {
        return closed ? vertices.size() : vertices.size() - 1;
    }
    Segment segment(std::size_t i) const {
        return {vertices[i], vertices[(i + 1) % vertices.size()]};
    }
    double min_segment_length() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < segment_count(); ++i) m = std::min(m, segment(i).length());
        return m;
    }
    std::vector<std::size_t> interior_vertices() const {
        std::vector<std::size_t> out;
        if (closed) {
            for (std::size_t i = 0; i < vertices.size(); ++i) out.push_back(i);
        } else {
            for (std::size_t i = 1; i + 1 < vertices.size(); ++i) out.push_back(i);
        }
        return out;
    }

    void finalize(const DomainPolygon& domain);

private:
    void resolve_graph_frame();
    void resolve_side();
};

namespace detail {

inline bool strictly_increasing(const std::vector<double>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (!(v[i + 1] > v[i])) return false;
    return true;
}

inline std::vector<double> rotated_abscissae(const std::vector<Vec2>& pts, double phi) {
    std::vector<double> xs;
    xs.reserve(pts.size());
    for (const auto& p : pts) xs.push_back(rotate(p, -phi).x);
    return xs;
}

}  // namespace detail

inline void FaultGeometry::resolve_graph_frame() {
    // Try the chord direction first, then scan candidate rotations.
    Vec2 chord = vertices.back() - vertices.front();
    double phi0 = std::atan2(chord.y, chord.x);
    if (detail::strictly_increasing(detail::rotated_abscissae(vertices, phi0))) {
        graph_rotation = phi0;
        return;
    }
    for (int k = 0; k < 720; ++k) {
        double phi = -M_PI + (2.0 * M_PI * k) / 720.0;
        if (detail::strictly_increasing(detail::rotated_abscissae(vertices, phi))) {
            graph_rotation = phi;
            return;
        }
    }
    throw Error(ErrorKind::validation,
                "open fault is not the graph of a function in any rotated frame");
}

inline void FaultGeometry::resolve_side() {
    if (side == ClosureSide::left) {
        resolved_side = +1;
        return;
    }
    if (side == ClosureSide::right) {
        resolved_side = -1;
        return;
    }
    // Automatic: choose the side on which interior corners open with angle < pi.
    int votes = 0;
    for (std::size_t i = 1; i + 1 < vertices.size(); ++i) {
        Vec2 d_prev = rotate(normalized(vertices[i - 1] - vertices[i]), -graph_rotation);
        Vec2 d_next = rotate(normalized(vertices[i + 1] - vertices[i]), -graph_rotation);
        double a = std::atan2(d_prev.y, d_prev.x);
        double b = std::atan2(d_next.y, d_next.x);
        double up_opening = wrap_angle(a - b);  // CCW span from next-ray to prev-ray
        if (up_opening > 0 && up_opening < M_PI)
            ++votes;  // upper sector is proper: corner opens upward
        else if (up_opening < 0 && up_opening > -M_PI)
            --votes;
    }
    resolved_side = votes > 0 ? +1 : -1;
}

/// Computes the canonical corner frame at an interior fault vertex.
/// Errors: endpoint vertex, straight vertex (opening pi), or a corner whose
/// enclosed-side sector is reflex.
inline CornerFrame corner_frame_of(const FaultGeometry& fault, std::size_t vertex_index) {
    const auto& vs = fault.vertices;
    std::size_t n = vs.size();
    std::size_t prev_seg, next_seg;
    Vec2 d_prev, d_next;
    if (fault.closed) {
        if (vertex_index >= n)
            throw Error(ErrorKind::validation, "corner vertex index out of range");
        prev_seg = (vertex_index + n - 1) % n;
        next_seg = vertex_index;
        d_prev = normalized(vs[(vertex_index + n - 1) % n] - vs[vertex_index]);
        d_next = normalized(vs[(vertex_index + 1) % n] - vs[vertex_index]);
    } else {
        if (vertex_index == 0 || vertex_index + 1 >= n)
            throw Error(ErrorKind::validation,
                        "corner frames exist only at interior fault vertices");
        prev_seg = vertex_index - 1;
        next_seg = vertex_index;
        d_prev = normalized(vs[vertex_index - 1] - vs[vertex_index]);
        d_next = normalized(vs[vertex_index + 1] - vs[vertex_index]);
    }

    double a = std::atan2(d_prev.y, d_prev.x);
    double b = std::atan2(d_next.y, d_next.x);
    double span_ab = wrap_angle(b - a);  // CCW from ray a to ray b, in (-pi, pi]
    if (std::abs(std::abs(span_ab) - M_PI) < 1e-12 || span_ab == 0.0)
        throw Error(ErrorKind::geometry, "no valid sector at a straight fault vertex");

    // Two candidate sectors: CCW from a to b (opening w) or from b to a (2 pi - w).
    struct Cand {
        double tm, tM;
        std::size_t seg_m, seg_M;
    };
    double w = span_ab > 0 ? span_ab : span_ab + 2.0 * M_PI;
    Cand c1{a, a + w, prev_seg, next_seg};            // minus edge along d_prev
    Cand c2{b, b + (2.0 * M_PI - w), next_seg, prev_seg};  // minus edge along d_next

    auto enclosed_contains = [&](double mid_angle) {
        Vec2 dir(std::cos(mid_angle), std::sin(mid_angle));
        if (fault.closed) {
            double eps = 1e-6 * fault.min_segment_length();
            return point_in_polygon(vs[vertex_index] + dir * eps, vs);
        }
        // Open fault: the enclosed side is the resolved graph-frame side.
        Vec2 g = rotate(dir, -fault.graph_rotation);
        return fault.resolved_side > 0 ? g.y > 0.0 : g.y < 0.0;
    };

    const Cand* chosen = nullptr;
    for (const Cand* c : {&c1, &c2}) {
        if (enclosed_contains(0.5 * (c->tm + c->tM))) {
            chosen = c;
            break;
        }
    }
    if (!chosen) throw Error(ErrorKind::geometry, "no sector side faces the enclosed region");
    double opening = chosen->tM - chosen->tm;
    if (!(opening > 0.0 && opening < M_PI))
        throw Error(ErrorKind::geometry,
                    "no valid sector: enclosed-side corner opening must lie in (0, pi)");

    CornerFrame f;
    f.x_c = vs[vertex_index];
    // Store with the mid-angle wrapped into (-pi, pi].
    double mid = 0.5 * (chosen->tm + chosen->tM);
    double shift = wrap_angle(mid) - mid;
    f.theta_m = chosen->tm + shift;
    f.theta_M = chosen->tM + shift;
    f.vertex = vertex_index;
    f.minus_segment = chosen->seg_m;
    f.plus_segment = chosen->seg_M;

    double lmin = std::min(fault.segment(prev_seg).length(), fault.segment(next_seg).length());
    auto it = fault.h_overrides.find(vertex_index);
    f.h = it != fault.h_overrides.end() ? it->second : 0.4 * lmin;
    if (f.h > 0.5 * lmin) f.h = 0.5 * lmin;
    if (!(f.h > 0.0)) throw Error(ErrorKind::validation, "corner probe radius must be positive");
    return f;
}

inline void FaultGeometry::finalize(const DomainPolygon& domain) {
    if (vertices.size() < 2)
        throw Error(ErrorKind::validation, "fault needs at least 2 vertices");
    for (std::size_t i = 0; i < segment_count(); ++i)
        if (segment(i).length() <= 0.0)
            throw Error(ErrorKind::validation, "degenerate fault segment " + std::to_string(i));
    if (closed) {
        if (vertices.size() < 3)
            throw Error(ErrorKind::validation, "closed fault needs at least 3 vertices");
        if (!polygon_is_simple(vertices))
            throw Error(ErrorKind::validation, "closed fault must be simple");
        if (!polygon_is_convex(vertices))
            throw Error(ErrorKind::validation, "closed fault must bound a convex polygon");
        if (polygon_signed_area(vertices) < 0.0)
            std::reverse(vertices.begin(), vertices.end());
    } else {
        if (!polyline_is_simple(vertices))
            throw Error(ErrorKind::validation, "open fault polyline must be simple");
        resolve_graph_frame();
        resolve_side();
    }

    // Strict interiority with positive clearance to the domain boundary.
    for (const auto& v : vertices)
        if (!point_in_polygon(v, domain.vertices))
            throw Error(ErrorKind::validation, "fault must lie strictly inside the domain");
    double clearance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segment_count(); ++i)
        for (std::size_t j = 0; j < domain.edge_count(); ++j)
            clearance = std::min(clearance,
                                 segment_segment_distance(segment(i), domain.edge(j)));
    if (!(clearance > 0.0))
        throw Error(ErrorKind::validation, "fault touches the domain boundary");

    frames.clear();
    for (auto i : interior_vertices()) {
        try {
            frames[i] = corner_frame_of(*this, i);
        } catch (const Error&) {
            // Straight or enclosed-side-reflex vertices carry no frame.
        }
    }
}

/// Result of closing an open fault: the closing arc (from the last fault
/// vertex back to the first) and the enclosed loop it bounds with the fault.
struct ClosureResult {
    std::vector<Vec2> gamma0;       // first point = last fault vertex, last = first vertex
    std::vector<Vec2> omega1_loop;  // positively oriented closed loop of Gamma
};

/// Builds a simple closing arc for an open fault by offsetting the fault
/// graph on the enclosed side, shrinking the offset until the arc clears both
/// the fault and the domain boundary.
inline ClosureResult close_open_fault(const FaultGeometry& fault, const DomainPolygon& domain,
                                      double clearance_fraction = 0.05) {
    if (fault.closed) throw Error(ErrorKind::validation, "fault already closed");
    double d0 = clearance_fraction * domain.diameter();

    std::string last_failure = "no candidate arc tried";
    for (int attempt = 0; attempt < 12; ++attempt) {
        double d = d0 * std::pow(0.5, attempt);
        double sgn = fault.resolved_side > 0 ? +1.0 : -1.0;

        // Flat cap in the graph frame at clearance d beyond the fault's
        // extreme height on the enclosed side, joined to the endpoints by
        // vertical risers: a three-segment arc.
        double extreme = sgn > 0 ? -1e300 : 1e300;
        for (const auto& v : fault.vertices) {
            double y = rotate(v, -fault.graph_rotation).y;
            extreme = sgn > 0 ? std::max(extreme, y) : std::min(extreme, y);
        }
        double level = extreme + sgn * d;
        Vec2 gb = rotate(fault.vertices.back(), -fault.graph_rotation);
        Vec2 ga = rotate(fault.vertices.front(), -fault.graph_rotation);
        std::vector<Vec2> arc;  // from last vertex back to first
        arc.push_back(fault.vertices.back());
        arc.push_back(rotate(Vec2{gb.x, level}, fault.graph_rotation));
        arc.push_back(rotate(Vec2{ga.x, level}, fault.graph_rotation));
        arc.push_back(fault.vertices.front());

        // Validate: simple, clear of the open part of the fault, inside the domain.
        bool ok = polyline_is_simple(arc);
        if (!ok) {
            last_failure = "closing arc self-intersects";
            continue;
        }
        for (std::size_t i = 0; ok && i + 1 < arc.size(); ++i) {
            Segment sa{arc[i], arc[i + 1]};
            for (std::size_t j = 0; ok && j < fault.segment_count(); ++j) {
                Segment sf = fault.segment(j);
                if (!segments_intersect(sa, sf)) continue;
                // Shared endpoints of the fault are the only allowed contacts.
                bool touches_end_only =
                    (i == 0 && j + 2 == fault.vertices.size()) ||
                    (i + 2 == arc.size() && j == 0);
                if (!touches_end_only) {
                    ok = false;
                    last_failure = "closing arc crosses fault segment " + std::to_string(j);
                }
            }
        }
        for (std::size_t i = 0; ok && i + 1 < arc.size(); ++i) {
            Segment sa{arc[i], arc[i + 1]};
            for (std::size_t j = 0; ok && j < domain.edge_count(); ++j) {
                if (segment_segment_distance(sa, domain.edge(j)) < 0.25 * d) {
                    ok = false;
                    last_failure = "closing arc too close to domain edge " + std::to_string(j);
                }
            }
            if (ok && !point_in_polygon(sa.at(0.5), domain.vertices)) {
                ok = false;
                last_failure = "closing arc leaves the domain";
            }
        }
        if (!ok) continue;

        ClosureResult res;
        res.gamma0 = arc;
        res.omega1_loop = fault.vertices;
        for (std::size_t i = 1; i + 1 < arc.size(); ++i) res.omega1_loop.push_back(arc[i]);
        if (polygon_signed_area(res.omega1_loop) < 0.0) {
            // Keep a positively oriented report of the enclosed region.
            std::reverse(res.omega1_loop.begin(), res.omega1_loop.end());
        }
        if (!polygon_is_simple(res.omega1_loop)) {
            last_failure = "closed contour is not simple";
            continue;
        }
        return res;
    }
    throw Error(ErrorKind::geometry, "no simple closing arc found within clearance: " +
                                         last_failure);
}

}  // namespace faultlab
