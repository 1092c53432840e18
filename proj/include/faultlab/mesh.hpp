#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faultlab/delaunay.hpp"
#include "faultlab/geo2d.hpp"
#include "faultlab/geometry.hpp"

namespace faultlab {

enum class MeshBoundaryTag { dirichlet, neumann, observation };

/// Conforming triangle mesh for the transmission problem. Nodes on the fault
/// (except open-fault endpoints) are stored twice; the plus copy belongs to
/// outside-region triangles only, the minus copy to enclosed-region triangles.
struct TransmissionMesh {
    struct Triangle {
        int v[3];
        int region;  // 1 = enclosed region, 0 = complement
    };
    struct InterfaceEdge {
        int segment_id;  // fault segment id, or n_fault_segments + k for the closing arc
        int plus_n1, plus_n2;
        int minus_n1, minus_n2;
        bool on_fault;   // false for closing-arc edges (no duplication, zero data)
    };
    struct BoundaryEdge {
        int n1, n2;
        MeshBoundaryTag tag;
        int domain_edge;          // owning domain polygon edge
        double arc0, arc1;        // arc-length along the full domain boundary
    };

    std::vector<Vec2> nodes;
    std::vector<Triangle> triangles;
    std::vector<InterfaceEdge> interface_edges;
    std::vector<BoundaryEdge> boundary_edges;
    double h_mesh = 0.0;
    int n_fault_segments = 0;
    bool fault_closed = false;

    // plus node id -> minus node id for duplicated pairs (and the reverse map).
    std::map<int, int> plus_to_minus;
    std::map<int, int> minus_to_plus;
    // Fault nodes that exist once (open-fault endpoints).
    std::set<int> shared_fault_nodes;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t dof_count() const { return 2 * nodes.size(); }

    bool is_minus_copy(int n) const { return minus_to_plus.count(n) > 0; }
    bool is_plus_copy(int n) const { return plus_to_minus.count(n) > 0; }

    /// Representative node for the continuous (merged-interface) space.
    int rep_node(int n) const {
        auto it = minus_to_plus.find(n);
        return it == minus_to_plus.end() ? n : it->second;
    }

    std::vector<int> dirichlet_nodes() const {
        std::set<int> s;
        for (const auto& be : boundary_edges)
            if (be.tag == MeshBoundaryTag::dirichlet) {
                s.insert(be.n1);
                s.insert(be.n2);
            }
        return {s.begin(), s.end()};
    }

    double triangle_area(const Triangle& t) const {
        return 0.5 * cross(nodes[t.v[1]] - nodes[t.v[0]], nodes[t.v[2]] - nodes[t.v[0]]);
    }

    double max_triangle_diameter() const {
        double d = 0.0;
        for (const auto& t : triangles)
            for (int e = 0; e < 3; ++e)
                d = std::max(d, dist(nodes[t.v[e]], nodes[t.v[(e + 1) % 3]]));
        return d;
    }

    void check_valid() const {
        for (const auto& t : triangles)
            if (triangle_area(t) <= 0.0)
                throw Error(ErrorKind::geometry, "non-positively-oriented triangle in mesh");
        for (const auto& [p, m] : plus_to_minus)
            if (dist(nodes[p], nodes[m]) != 0.0)
                throw Error(ErrorKind::geometry, "interface node copies must coincide");
        for (const auto& t : triangles) {
            for (int e = 0; e < 3; ++e) {
                int n = t.v[e];
                if (is_minus_copy(n) && t.region != 1)
                    throw Error(ErrorKind::geometry,
                                "minus-side interface copy used by an outside triangle");
                if (is_plus_copy(n) && t.region != 0)
                    throw Error(ErrorKind::geometry,
                                "plus-side interface copy used by an enclosed triangle");
            }
        }
    }
};

struct MeshingInput {
    DomainPolygon domain;
    FaultGeometry fault;
    std::vector<Vec2> gamma0;  // empty for closed faults
};

namespace detail {

class PointBank {
public:
    explicit PointBank(double tol) : tol_(tol) {}

    int add(const Vec2& p) {
        auto key = quantize(p);
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(points_.size());
        points_.push_back(p);
        index_[key] = id;
        return id;
    }

    std::optional<int> find(const Vec2& p) const {
        auto it = index_.find(quantize(p));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<Vec2>& points() const { return points_; }

private:
    std::pair<std::int64_t, std::int64_t> quantize(const Vec2& p) const {
        return {static_cast<std::int64_t>(std::llround(p.x / tol_)),
                static_cast<std::int64_t>(std::llround(p.y / tol_))};
    }
    double tol_;
    std::vector<Vec2> points_;
    std::map<std::pair<std::int64_t, std::int64_t>, int> index_;
};

// Deterministic tiny jitter to break cocircular grid degeneracies.
inline double hash_jitter(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return (static_cast<double>(k % 2000001) / 1000000.0) - 1.0;  // in [-1, 1]
}

// Target mesh size at a point: the base size away from fault corners, graded
// down geometrically inside the grading radius around each corner point.
struct SizeField {
    std::vector<Vec2> centers;  // fault corners and open-fault endpoints
    double h = 0.1;
    double radius = 0.0;   // grading radius; 0 disables grading
    double floor = 0.25;   // minimum fraction of h at the corner

    double at(const Vec2& p) const {
        if (radius <= 0.0 || centers.empty()) return h;
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) d = std::min(d, dist(p, c));
        return h * std::clamp(d / radius, floor, 1.0);
    }
};

inline std::vector<int> subdivide_on(PointBank& bank, const Segment& seg, const SizeField& size) {
    std::vector<double> ts{0.0};
    double L = seg.length();
    double t = 0.0;
    while (true) {
        double step = size.at(seg.at(t)) / L;
        double tn = t + step;
        if (tn >= 1.0 - 0.45 * step) break;
        ts.push_back(tn);
        t = tn;
    }
    ts.push_back(1.0);
    std::vector<int> ids;
    for (double tt : ts) ids.push_back(bank.add(seg.at(tt)));
    return ids;
}

}  // namespace detail

/// Builds the conforming transmission mesh: constrained Delaunay triangulation
/// respecting the domain boundary, the fault, and the closing arc, followed by
/// node duplication along the fault. A positive grading radius refines the
/// mesh geometrically toward fault corners and open-fault endpoints.
inline TransmissionMesh build_mesh(const MeshingInput& in, double h_mesh,
                                   double grading_radius = 0.0,
                                   double grading_floor = 0.25) {
    const DomainPolygon& domain = in.domain;
    const FaultGeometry& fault = in.fault;
    if (!(h_mesh > 0.0)) throw Error(ErrorKind::validation, "mesh size must be positive");
    if (!fault.vertices.empty() && h_mesh >= fault.min_segment_length())
        throw Error(ErrorKind::validation,
                    "mesh size must be smaller than the shortest fault segment");
    if (!fault.closed && in.gamma0.empty())
        throw Error(ErrorKind::validation, "open fault requires a closing arc before meshing");

    // Constraint segments: domain boundary, fault, closing arc.
    struct Constraint {
        Segment seg;
        int kind;  // 0 boundary, 1 fault, 2 closing arc
        int id;    // domain edge id / fault segment id / arc piece id
    };
    std::vector<Constraint> constraints;
    for (std::size_t i = 0; i < domain.edge_count(); ++i)
        constraints.push_back({domain.edge(i), 0, static_cast<int>(i)});
    for (std::size_t i = 0; i < fault.segment_count(); ++i)
        constraints.push_back({fault.segment(i), 1, static_cast<int>(i)});
    for (std::size_t i = 0; i + 1 < in.gamma0.size(); ++i)
        constraints.push_back({Segment{in.gamma0[i], in.gamma0[i + 1]}, 2, static_cast<int>(i)});

    // Unresolvable-geometry guard: distinct constraints closer than h/4
    // anywhere other than shared endpoints cannot be meshed at this size.
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        for (std::size_t j = i + 1; j < constraints.size(); ++j) {
            const Segment& a = constraints[i].seg;
            const Segment& b = constraints[j].seg;
            bool share = dist(a.a, b.a) < 1e-12 || dist(a.a, b.b) < 1e-12 ||
                         dist(a.b, b.a) < 1e-12 || dist(a.b, b.b) < 1e-12;
            if (share) continue;
            if (segment_segment_distance(a, b) < 0.25 * h_mesh)
                throw Error(ErrorKind::geometry,
                            "segments closer than h/4; refine h_mesh or adjust geometry");
        }
    }

    double diam = domain.diameter();
    detail::PointBank bank(1e-9 * diam);

    // Grading toward fault corners and open-fault endpoints resolves the
    // corner behavior of the fields without refining the whole mesh.
    detail::SizeField size;
    size.h = h_mesh;
    size.radius = grading_radius;
    size.floor = std::clamp(grading_floor, 0.05, 1.0);
    for (auto idx : fault.interior_vertices())
        if (fault.frames.count(idx)) size.centers.push_back(fault.vertices[idx]);
    if (!fault.closed) {
        size.centers.push_back(fault.vertices.front());
        size.centers.push_back(fault.vertices.back());
    }

    struct ChainRecord {
        int kind, id;
        std::vector<int> nodes;
    };
    std::vector<ChainRecord> chains;
    for (const auto& c : constraints)
        chains.push_back({c.kind, c.id, detail::subdivide_on(bank, c.seg, size)});

    // Interior points: one offset lattice per refinement level, each kept in
    // the band where its spacing matches the size field, clear of constraints.
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (const auto& v : domain.vertices) {
        lo.x = std::min(lo.x, v.x);
        lo.y = std::min(lo.y, v.y);
        hi.x = std::max(hi.x, v.x);
        hi.y = std::max(hi.y, v.y);
    }
    int levels = size.radius > 0.0 ? 1 + static_cast<int>(std::ceil(std::log2(1.0 / size.floor)))
                                   : 1;
    // Proximity grid over everything accepted so far (constraint subdivisions
    // included) so grading-band seams cannot produce near-coincident points.
    double cell = 0.25 * h_mesh / double(1 << (levels - 1));
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Vec2>> prox;
    auto prox_key = [cell](const Vec2& p) {
        return std::pair{static_cast<std::int64_t>(std::floor(p.x / cell)),
                         static_cast<std::int64_t>(std::floor(p.y / cell))};
    };
    auto prox_add = [&](const Vec2& p) { prox[prox_key(p)].push_back(p); };
    auto prox_clear_within = [&](const Vec2& p, double r) {
        int span = static_cast<int>(std::ceil(r / cell)) + 1;
        auto [ci, cj] = prox_key(p);
        for (int di = -span; di <= span; ++di)
            for (int dj = -span; dj <= span; ++dj) {
                auto it = prox.find({ci + di, cj + dj});
                if (it == prox.end()) continue;
                for (const auto& q : it->second)
                    if (dist(p, q) < r) return false;
            }
        return true;
    };
    for (const auto& p : bank.points()) prox_add(p);

    for (int lev = 0; lev < levels; ++lev) {
        double s = h_mesh / double(1 << lev);
        double row_h = s * std::sqrt(3.0) / 2.0;
        int nrows = static_cast<int>((hi.y - lo.y) / row_h) + 1;
        int ncols = static_cast<int>((hi.x - lo.x) / s) + 2;
        for (int r = 0; r <= nrows; ++r) {
            double y = lo.y + r * row_h;
            double x0 = lo.x + (r % 2 == 0 ? 0.0 : 0.5 * s);
            for (int cidx = 0; cidx <= ncols; ++cidx) {
                double x = x0 + cidx * s;
                std::uint64_t key = (static_cast<std::uint64_t>(lev) << 40) +
                                    static_cast<std::uint64_t>(r) * 1000003ULL + cidx;
                Vec2 p{x + 2e-4 * s * detail::hash_jitter(key),
                       y + 2e-4 * s * detail::hash_jitter(key * 7919ULL + 13ULL)};
                double target = size.at(p);
                // Disjoint bands: each level owns target sizes in [0.75 s, 1.5 s).
                bool band_ok = (target >= 0.75 * s || lev == levels - 1) &&
                               (lev == 0 || target < 1.5 * s);
                if (!band_ok) continue;
                if (!point_in_polygon(p, domain.vertices)) continue;
                bool clear = true;
                for (const auto& c : constraints)
                    if (point_segment_distance(p, c.seg) < 0.55 * s) {
                        clear = false;
                        break;
                    }
                if (clear && !prox_clear_within(p, 0.5 * s)) clear = false;
                if (clear) {
                    bank.add(p);
                    prox_add(p);
                }
            }
        }
    }

    DelaunayMesher dt(bank.points());
    for (const auto& ch : chains)
        for (std::size_t k = 0; k + 1 < ch.nodes.size(); ++k)
            dt.enforce_edge(ch.nodes[k], ch.nodes[k + 1]);

    // Keep triangles inside the domain; classify against the closed contour.
    std::vector<Vec2> gamma_loop;
    if (fault.closed) {
        gamma_loop = fault.vertices;
    } else {
        gamma_loop = fault.vertices;
        for (std::size_t i = 1; i + 1 < in.gamma0.size(); ++i) gamma_loop.push_back(in.gamma0[i]);
    }

    TransmissionMesh mesh;
    mesh.h_mesh = h_mesh;
    mesh.n_fault_segments = static_cast<int>(fault.segment_count());
    mesh.fault_closed = fault.closed;
    mesh.nodes = bank.points();
    for (const auto& tv : dt.triangles()) {
        Vec2 c = (mesh.nodes[tv[0]] + mesh.nodes[tv[1]] + mesh.nodes[tv[2]]) / 3.0;
        if (!point_in_polygon(c, domain.vertices)) continue;
        int region = point_in_polygon(c, gamma_loop) ? 1 : 0;
        mesh.triangles.push_back({{tv[0], tv[1], tv[2]}, region});
    }

    // Boundary edges with tags and boundary arc-length coordinates.
    double arc_acc = 0.0;
    for (std::size_t i = 0; i < domain.edge_count(); ++i) {
        const auto& ch = chains[i];
        Segment e = domain.edge(i);
        MeshBoundaryTag tag = domain.edge_tags[i] == BoundaryTag::dirichlet
                                  ? MeshBoundaryTag::dirichlet
                                  : (domain.is_observation_edge(i) ? MeshBoundaryTag::observation
                                                                   : MeshBoundaryTag::neumann);
        double piece = e.length() / (ch.nodes.size() - 1);
        for (std::size_t k = 0; k + 1 < ch.nodes.size(); ++k) {
            mesh.boundary_edges.push_back({ch.nodes[k], ch.nodes[k + 1], tag,
                                           static_cast<int>(i), arc_acc + k * piece,
                                           arc_acc + (k + 1) * piece});
        }
        arc_acc += e.length();
    }

    // Split along the fault: duplicate every fault node except open endpoints.
    std::set<int> fault_nodes;
    for (std::size_t ci = domain.edge_count();
         ci < domain.edge_count() + fault.segment_count(); ++ci)
        for (int nid : chains[ci].nodes) fault_nodes.insert(nid);
    std::set<int> endpoint_nodes;
    if (!fault.closed) {
        auto first = bank.find(fault.vertices.front());
        auto last = bank.find(fault.vertices.back());
        if (first) endpoint_nodes.insert(*first);
        if (last) endpoint_nodes.insert(*last);
    }

    std::map<int, int> minus_of;  // original (plus) -> minus copy
    for (int n : fault_nodes) {
        if (endpoint_nodes.count(n)) {
            mesh.shared_fault_nodes.insert(n);
            continue;
        }
        int m = static_cast<int>(mesh.nodes.size());
        mesh.nodes.push_back(mesh.nodes[n]);
        minus_of[n] = m;
        mesh.plus_to_minus[n] = m;
        mesh.minus_to_plus[m] = n;
    }
    for (auto& t : mesh.triangles) {
        if (t.region != 1) continue;
        for (int e = 0; e < 3; ++e) {
            auto it = minus_of.find(t.v[e]);
            if (it != minus_of.end()) t.v[e] = it->second;
        }
    }

    // Interface edges: fault pieces (duplicated pairs) and closing-arc pieces.
    for (std::size_t ci = domain.edge_count(); ci < chains.size(); ++ci) {
        const auto& ch = chains[ci];
        bool on_fault = (ch.kind == 1);
        for (std::size_t k = 0; k + 1 < ch.nodes.size(); ++k) {
            int a = ch.nodes[k], b = ch.nodes[k + 1];
            int am = minus_of.count(a) ? minus_of[a] : a;
            int bm = minus_of.count(b) ? minus_of[b] : b;
            int seg_id = on_fault ? ch.id : mesh.n_fault_segments + ch.id;
            mesh.interface_edges.push_back({seg_id, a, b, am, bm, on_fault});
        }
    }

    mesh.check_valid();
    return mesh;
}

/// Convenience wrapper: closes the fault when necessary and meshes.
inline TransmissionMesh mesh_scene(const DomainPolygon& domain, FaultGeometry fault,
                                   double h_mesh, double clearance_fraction = 0.05,
                                   double grading_radius = 0.0, double grading_floor = 0.25) {
    fault.finalize(domain);
    MeshingInput in{domain, fault, {}};
    if (!fault.closed) in.gamma0 = close_open_fault(fault, domain, clearance_fraction).gamma0;
    return build_mesh(in, h_mesh, grading_radius, grading_floor);
}

}  // namespace faultlab
