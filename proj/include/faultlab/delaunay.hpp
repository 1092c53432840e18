#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "faultlab/geo2d.hpp"

namespace faultlab {

// Bowyer-Watson Delaunay triangulation with constrained-edge recovery by
// cavity retriangulation. Index-based; triangle vertex order is CCW.
class DelaunayMesher {
public:
    struct Tri {
        int v[3];
        bool alive = true;
    };

    explicit DelaunayMesher(const std::vector<Vec2>& points) : pts_(points) {
        build();
    }

    /// Ensures the edge (a, b) appears in the triangulation, retriangulating
    /// the crossed cavity when needed.
    void enforce_edge(int a, int b) {
        if (edge_exists(a, b)) return;
        std::vector<int> crossed = collect_crossed(a, b);
        if (crossed.empty())
            throw Error(ErrorKind::geometry,
                        "constraint edge recovery failed: no crossed triangles found");
        std::vector<int> upper, lower;
        classify_cavity(a, b, crossed, upper, lower);
        for (int t : crossed) tris_[t].alive = false;
        retriangulate_chain(a, b, lower);
        std::reverse(upper.begin(), upper.end());
        retriangulate_chain(b, a, upper);
        if (!edge_exists(a, b))
            throw Error(ErrorKind::geometry, "constraint edge recovery failed to insert edge");
    }

    /// Finished triangles as vertex triples (super-triangle corners removed).
    std::vector<std::array<int, 3>> triangles() const {
        std::vector<std::array<int, 3>> out;
        int n = static_cast<int>(pts_.size());
        for (const auto& t : tris_) {
            if (!t.alive) continue;
            if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
            out.push_back({t.v[0], t.v[1], t.v[2]});
        }
        return out;
    }

private:
    std::vector<Vec2> pts_;
    std::vector<Tri> tris_;
    double scale_ = 1.0;

    static double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
        return cross(b - a, c - a);
    }

    bool in_circumcircle(const Tri& t, const Vec2& p) const {
        const Vec2& a = pt(t.v[0]);
        const Vec2& b = pt(t.v[1]);
        const Vec2& c = pt(t.v[2]);
        long double ax = a.x - p.x, ay = a.y - p.y;
        long double bx = b.x - p.x, by = b.y - p.y;
        long double cx = c.x - p.x, cy = c.y - p.y;
        long double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                          (bx * bx + by * by) * (ax * cy - cx * ay) +
                          (cx * cx + cy * cy) * (ax * by - bx * ay);
        return det > 0.0L;
    }

    bool triangle_contains(const Tri& t, const Vec2& p) const {
        const Vec2& a = pt(t.v[0]);
        const Vec2& b = pt(t.v[1]);
        const Vec2& c = pt(t.v[2]);
        auto side = [](const Vec2& u, const Vec2& v, const Vec2& q) {
            long double d = (static_cast<long double>(v.x) - u.x) * (q.y - u.y) -
                            (static_cast<long double>(v.y) - u.y) * (q.x - u.x);
            return d;
        };
        return side(a, b, p) >= 0.0L && side(b, c, p) >= 0.0L && side(c, a, p) >= 0.0L;
    }

    const Vec2& pt(int i) const {
        if (i < static_cast<int>(pts_.size())) return pts_[i];
        return super_[i - pts_.size()];
    }

    std::array<Vec2, 3> super_;

    void build() {
        // Super-triangle generously containing all points.
        Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
        for (const auto& p : pts_) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
        Vec2 c = (lo + hi) * 0.5;
        double d = std::max(hi.x - lo.x, hi.y - lo.y) + 1.0;
        scale_ = d;
        super_ = {Vec2{c.x - 20.0 * d, c.y - 10.0 * d}, Vec2{c.x + 20.0 * d, c.y - 10.0 * d},
                  Vec2{c.x, c.y + 20.0 * d}};
        int n = static_cast<int>(pts_.size());
        tris_.push_back({{n, n + 1, n + 2}, true});

        for (int i = 0; i < n; ++i) insert_point(i);
    }

    void insert_point(int ip) {
        const Vec2& p = pts_[ip];
        std::vector<int> bad_all;
        int containing = -1;
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            if (!tris_[t].alive) continue;
            if (in_circumcircle(tris_[t], p)) {
                bad_all.push_back(t);
                if (containing < 0 && triangle_contains(tris_[t], p)) containing = t;
            }
        }
        // Keep only the edge-connected component of the containing triangle;
        // roundoff can otherwise leave disconnected slivers in the bad set,
        // which breaks the cavity boundary.
        std::vector<int> bad;
        if (containing < 0) {
            bad = bad_all;
        } else {
            std::map<std::pair<int, int>, std::vector<int>> by_edge;
            for (int t : bad_all)
                for (int e = 0; e < 3; ++e) {
                    auto key = std::minmax(tris_[t].v[e], tris_[t].v[(e + 1) % 3]);
                    by_edge[{key.first, key.second}].push_back(t);
                }
            std::set<int> seen{containing};
            std::vector<int> stack{containing};
            while (!stack.empty()) {
                int t = stack.back();
                stack.pop_back();
                bad.push_back(t);
                for (int e = 0; e < 3; ++e) {
                    auto key = std::minmax(tris_[t].v[e], tris_[t].v[(e + 1) % 3]);
                    for (int o : by_edge[{key.first, key.second}])
                        if (!seen.count(o)) {
                            seen.insert(o);
                            stack.push_back(o);
                        }
                }
            }
        }
        // Boundary of the union of bad triangles.
        std::map<std::pair<int, int>, int> edge_count;
        for (int t : bad) {
            for (int e = 0; e < 3; ++e) {
                int u = tris_[t].v[e], v = tris_[t].v[(e + 1) % 3];
                auto key = std::minmax(u, v);
                edge_count[{key.first, key.second}]++;
            }
        }
        std::vector<std::pair<int, int>> boundary;
        for (int t : bad) {
            for (int e = 0; e < 3; ++e) {
                int u = tris_[t].v[e], v = tris_[t].v[(e + 1) % 3];
                auto key = std::minmax(u, v);
                if (edge_count[{key.first, key.second}] == 1) boundary.push_back({u, v});
            }
        }
        for (int t : bad) tris_[t].alive = false;
        for (auto [u, v] : boundary) {
            if (orient(pt(u), pt(v), p) <= 0.0) std::swap(u, v);
            tris_.push_back({{u, v, ip}, true});
        }
    }

    bool edge_exists(int a, int b) const {
        for (const auto& t : tris_) {
            if (!t.alive) continue;
            for (int e = 0; e < 3; ++e) {
                int u = t.v[e], v = t.v[(e + 1) % 3];
                if ((u == a && v == b) || (u == b && v == a)) return true;
            }
        }
        return false;
    }

    static bool proper_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
        double d1 = orient(p1, p2, q1), d2 = orient(p1, p2, q2);
        double d3 = orient(q1, q2, p1), d4 = orient(q1, q2, p2);
        return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
    }

    std::vector<int> collect_crossed(int a, int b) const {
        std::vector<int> out;
        const Vec2& pa = pts_[a];
        const Vec2& pb = pts_[b];
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            const Tri& tr = tris_[t];
            if (!tr.alive) continue;
            bool touches_ab =
                tr.v[0] == a || tr.v[1] == a || tr.v[2] == a || tr.v[0] == b || tr.v[1] == b ||
                tr.v[2] == b;
            int crossings = 0;
            for (int e = 0; e < 3; ++e) {
                int u = tr.v[e], v = tr.v[(e + 1) % 3];
                if (u == a || u == b || v == a || v == b) continue;
                if (proper_cross(pa, pb, pt(u), pt(v))) ++crossings;
            }
            if (crossings >= (touches_ab ? 1 : 2)) out.push_back(t);
        }
        return out;
    }

    void classify_cavity(int a, int b, const std::vector<int>& crossed, std::vector<int>& upper,
                         std::vector<int>& lower) const {
        const Vec2& pa = pts_[a];
        const Vec2& pb = pts_[b];
        std::set<int> verts;
        for (int t : crossed)
            for (int e = 0; e < 3; ++e) verts.insert(tris_[t].v[e]);
        verts.erase(a);
        verts.erase(b);
        std::vector<int> up, lo;
        for (int v : verts) {
            double s = orient(pa, pb, pt(v));
            if (s > 0)
                up.push_back(v);
            else
                lo.push_back(v);
        }
        auto along = [&](int u, int v) {
            return dot(pt(u) - pa, pb - pa) < dot(pt(v) - pa, pb - pa);
        };
        std::sort(up.begin(), up.end(), along);
        std::sort(lo.begin(), lo.end(), along);
        upper = up;
        lower = lo;
    }

    // Triangulates the pseudo-polygon a -> chain -> b (chain on the right of a->b),
    // picking the chain vertex subtending the largest angle over (a, b).
    void retriangulate_chain(int a, int b, const std::vector<int>& chain) {
        if (chain.empty()) return;
        if (chain.size() == 1) {
            add_tri(a, b, chain[0]);
            return;
        }
        std::size_t best = 0;
        double best_angle = -1.0;
        for (std::size_t i = 0; i < chain.size(); ++i) {
            Vec2 u = pts_[a] - pt(chain[i]);
            Vec2 v = pts_[b] - pt(chain[i]);
            double ang = std::acos(std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0));
            if (ang > best_angle) {
                best_angle = ang;
                best = i;
            }
        }
        int c = chain[best];
        add_tri(a, b, c);
        std::vector<int> left(chain.begin(), chain.begin() + best);
        std::vector<int> right(chain.begin() + best + 1, chain.end());
        retriangulate_chain(a, c, left);
        retriangulate_chain(c, b, right);
    }

    void add_tri(int a, int b, int c) {
        if (orient(pt(a), pt(b), pt(c)) <= 0.0) std::swap(b, c);
        tris_.push_back({{a, b, c}, true});
    }
};

}  // namespace faultlab
