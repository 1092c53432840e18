#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faultlab/assembly.hpp"
#include "faultlab/cgo.hpp"
#include "faultlab/jumps.hpp"
#include "faultlab/quadrature.hpp"

namespace faultlab {

/// Nodal displacement field over a transmission mesh (2 components per node).
struct DisplacementField {
    const TransmissionMesh* mesh = nullptr;
    Eigen::VectorXd nodal;  // size 2 * node_count

    Vec2 at(int node) const { return {nodal[2 * node], nodal[2 * node + 1]}; }
    void set(int node, const Vec2& v) {
        nodal[2 * node] = v.x;
        nodal[2 * node + 1] = v.y;
    }

    static DisplacementField zeros(const TransmissionMesh& m) {
        DisplacementField f;
        f.mesh = &m;
        f.nodal = Eigen::VectorXd::Zero(static_cast<int>(m.dof_count()));
        return f;
    }

    /// Constant P1 gradient on a triangle; (grad u)_{jk} = d_k u_j.
    Mat2 gradient_on(std::size_t tri) const {
        const auto& t = mesh->triangles[tri];
        const Vec2& p0 = mesh->nodes[t.v[0]];
        const Vec2& p1 = mesh->nodes[t.v[1]];
        const Vec2& p2 = mesh->nodes[t.v[2]];
        double A2 = cross(p1 - p0, p2 - p0);
        const Vec2 p[3] = {p0, p1, p2};
        Mat2 gr{{{0.0, 0.0}, {0.0, 0.0}}};
        for (int i = 0; i < 3; ++i) {
            Vec2 e = p[(i + 1) % 3] - p[(i + 2) % 3];
            Vec2 gl = Vec2{e.y, -e.x} / A2;
            Vec2 ui = at(t.v[i]);
            gr[0][0] += ui.x * gl.x;
            gr[0][1] += ui.x * gl.y;
            gr[1][0] += ui.y * gl.x;
            gr[1][1] += ui.y * gl.y;
        }
        return gr;
    }
};

enum class SolverKind { direct, cg };

struct SolverOptions {
    SolverKind kind = SolverKind::direct;
    double tolerance = 1e-12;
};

namespace detail {

inline Eigen::VectorXd solve_spd(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                                 const SolverOptions& opts, const char* what) {
    if (opts.kind == SolverKind::direct) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
        if (ldlt.info() != Eigen::Success)
            throw Error(ErrorKind::numeric, std::string("sparse factorization failed in ") + what);
        return ldlt.solve(b);
    }
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg(A);
    cg.setTolerance(opts.tolerance);
    cg.setMaxIterations(20000);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success)
        throw Error(ErrorKind::numeric, std::string("conjugate gradient stalled in ") + what);
    return x;
}

}  // namespace detail

/// Nodal Dirichlet values of the lifted jump on the closed contour Gamma:
/// the prescribed f on plus-side fault copies, zero on the closing arc and at
/// open-fault endpoints.
inline std::map<int, Vec2> boundary_values_from_jumps(const TransmissionMesh& mesh,
                                                      const FaultGeometry& fault,
                                                      const JumpData& jumps) {
    // Average the contributions of all incident interface edges so that a
    // corner node between segments with different constants takes the mean of
    // the two one-sided values.
    std::map<int, std::pair<Vec2, int>> acc;
    for (const auto& ie : mesh.interface_edges) {
        if (!ie.on_fault) {
            acc.emplace(ie.plus_n1, std::pair{Vec2{0.0, 0.0}, 1});
            acc.emplace(ie.plus_n2, std::pair{Vec2{0.0, 0.0}, 1});
            continue;
        }
        Segment seg = fault.segment(ie.segment_id);
        double L = seg.length();
        for (int n : {ie.plus_n1, ie.plus_n2}) {
            if (mesh.shared_fault_nodes.count(n)) {
                acc[n] = {Vec2{0.0, 0.0}, 1};  // open-fault endpoint: zero extension
                continue;
            }
            double t = dist(mesh.nodes[n], seg.a) / L;
            Vec2 v = jumps.f_eval(ie.segment_id, t);
            auto [it, fresh] = acc.emplace(n, std::pair{v, 1});
            if (!fresh && !mesh.shared_fault_nodes.count(n)) {
                it->second.first += v;
                it->second.second += 1;
            }
        }
    }
    std::map<int, Vec2> vals;
    for (const auto& [n, pv] : acc) vals[n] = pv.first / double(pv.second);
    return vals;
}

/// Solves the auxiliary Dirichlet problem on the complement region: elastic
/// equilibrium with the given trace on Gamma and zero on the outer boundary.
/// The returned field vanishes at all enclosed-region nodes.
inline DisplacementField lift_dirichlet(const TransmissionMesh& mesh, const Material& material,
                                        const std::map<int, Vec2>& gamma_values,
                                        const SolverOptions& opts = {}) {
    material.validate(mesh.triangles.size());
    DisplacementField lift = DisplacementField::zeros(mesh);

    // Outside-region nodes and the Dirichlet subset (Gamma plus outer boundary).
    std::vector<char> outside_node(mesh.nodes.size(), 0);
    for (const auto& t : mesh.triangles)
        if (t.region == 0)
            for (int e = 0; e < 3; ++e) outside_node[t.v[e]] = 1;

    std::map<int, Vec2> bc = gamma_values;
    for (const auto& be : mesh.boundary_edges) {
        bc[be.n1] = {0.0, 0.0};
        bc[be.n2 /*outer boundary clamp*/] = {0.0, 0.0};
    }

    int ndofs = static_cast<int>(mesh.dof_count());
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<char> constrained(ndofs, 1);
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
        if (outside_node[n] && !bc.count(static_cast<int>(n))) {
            constrained[2 * n] = 0;
            constrained[2 * n + 1] = 0;
        }

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        if (tri.region != 0) continue;
        Mat6 K = element_stiffness(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]],
                                   mesh.nodes[tri.v[2]], material.at(t));
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b)
                trips.emplace_back(2 * tri.v[a / 2] + a % 2, 2 * tri.v[b / 2] + b % 2, K(a, b));
    }
    ReducedSystem sys = reduce_system(trips, ndofs, constrained);

    Eigen::VectorXd uc = Eigen::VectorXd::Zero(sys.constrained_dofs.size());
    for (std::size_t k = 0; k < sys.constrained_dofs.size(); ++k) {
        int d = sys.constrained_dofs[k];
        auto it = bc.find(d / 2);
        if (it != bc.end()) uc[k] = d % 2 == 0 ? it->second.x : it->second.y;
    }
    if (!sys.dof_of_free.empty()) {
        Eigen::VectorXd rhs = -sys.Afc * uc;
        Eigen::VectorXd x = detail::solve_spd(sys.Aff, rhs, opts, "lift_dirichlet");
        for (std::size_t k = 0; k < sys.dof_of_free.size(); ++k)
            lift.nodal[sys.dof_of_free[k]] = x[k];
    }
    for (const auto& [n, v] : bc)
        if (outside_node[n]) lift.set(n, v);
    return lift;
}

struct SolveDiagnostics {
    double jump_error = 0.0;       // max |(u+ - u-) - f| over fault node pairs
    double dirichlet_error = 0.0;  // max |u| over clamped nodes
    double symmetry_defect = 0.0;
};

struct SolveResult {
    DisplacementField u;
    DisplacementField lift;
    SolveDiagnostics diag;
};

/// Outward (plus-ward) unit normal of a fault interface edge, oriented toward
/// the complement region.
inline Vec2 interface_edge_normal(const TransmissionMesh& mesh,
                                  const TransmissionMesh::InterfaceEdge& ie) {
    Vec2 a = mesh.nodes[ie.plus_n1];
    Vec2 b = mesh.nodes[ie.plus_n2];
    Vec2 n = normalized(perp(b - a));
    // Orient toward the plus-side triangle.
    for (const auto& t : mesh.triangles) {
        if (t.region != 0) continue;
        int hits = 0;
        for (int e = 0; e < 3; ++e)
            if (t.v[e] == ie.plus_n1 || t.v[e] == ie.plus_n2) ++hits;
        if (hits == 2) {
            Vec2 c = (mesh.nodes[t.v[0]] + mesh.nodes[t.v[1]] + mesh.nodes[t.v[2]]) / 3.0;
            if (dot(c - (a + b) * 0.5, n) < 0.0) n = -n;
            return n;
        }
    }
    throw Error(ErrorKind::geometry, "interface edge has no plus-side triangle");
}

/// Direct transmission solve: lifts the displacement jump, assembles the
/// variational problem for the continuous remainder, solves, and recombines.
inline SolveResult solve_direct(const TransmissionMesh& mesh, const Material& material,
                                const FaultGeometry& fault, const JumpData& jumps,
                                const SolverOptions& opts = {},
                                const std::optional<BodyForce>& body = std::nullopt) {
    jumps.validate(fault);
    if (static_cast<int>(fault.segment_count()) != mesh.n_fault_segments)
        throw Error(ErrorKind::validation, "jump data does not match the meshed fault");

    auto gamma_vals = boundary_values_from_jumps(mesh, fault, jumps);
    DisplacementField lift = DisplacementField::zeros(mesh);
    if (!jumps.all_zero_f()) lift = lift_dirichlet(mesh, material, gamma_vals, opts);

    SparseSystem sys = assemble(mesh, material, body);
    Eigen::VectorXd rhs_full = Eigen::VectorXd::Zero(2 * sys.n_wnodes);

    // Traction-jump line term: -int_Gamma g . phi (zero on the closing arc).
    static const double gauss2[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (const auto& ie : mesh.interface_edges) {
        if (!ie.on_fault) continue;
        Segment seg = fault.segment(ie.segment_id);
        double L = seg.length();
        Vec2 a = mesh.nodes[ie.plus_n1], b = mesh.nodes[ie.plus_n2];
        double ta = dist(a, seg.a) / L, tb = dist(b, seg.a) / L;
        double elen = dist(a, b);
        for (double q : gauss2) {
            double t = ta + (tb - ta) * q;
            Vec2 g = jumps.g_eval(ie.segment_id, t);
            double w = 0.5 * elen;
            rhs_full[sys.wdof(ie.plus_n1, 0)] -= w * g.x * (1.0 - q);
            rhs_full[sys.wdof(ie.plus_n1, 1)] -= w * g.y * (1.0 - q);
            rhs_full[sys.wdof(ie.plus_n2, 0)] -= w * g.x * q;
            rhs_full[sys.wdof(ie.plus_n2, 1)] -= w * g.y * q;
        }
    }

    // Lift coupling: -int_{complement} (C : grad u_lift) : grad phi.
    if (!jumps.all_zero_f()) {
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const auto& tri = mesh.triangles[t];
            if (tri.region != 0) continue;
            Mat6 K = element_stiffness(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]],
                                       mesh.nodes[tri.v[2]], material.at(t));
            Vec6 ul;
            for (int i = 0; i < 3; ++i) {
                Vec2 v = lift.at(tri.v[i]);
                ul[2 * i] = v.x;
                ul[2 * i + 1] = v.y;
            }
            Vec6 y = K * ul;
            for (int i = 0; i < 3; ++i)
                for (int c = 0; c < 2; ++c) rhs_full[sys.wdof(tri.v[i], c)] -= y[2 * i + c];
        }
    }

    Eigen::VectorXd rhs = sys.rhs;
    for (std::size_t k = 0; k < sys.reduced.dof_of_free.size(); ++k)
        rhs[k] += rhs_full[sys.reduced.dof_of_free[k]];

    Eigen::VectorXd wfree = detail::solve_spd(sys.reduced.Aff, rhs, opts, "solve_direct");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * sys.n_wnodes);
    for (std::size_t k = 0; k < sys.reduced.dof_of_free.size(); ++k)
        w[sys.reduced.dof_of_free[k]] = wfree[k];

    SolveResult res;
    res.u = DisplacementField::zeros(mesh);
    res.lift = lift;
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
        int wn = sys.wnode_of_node[n];
        Vec2 wv{w[2 * wn], w[2 * wn + 1]};
        res.u.set(static_cast<int>(n), wv + lift.at(static_cast<int>(n)));
    }

    // Post-conditions.
    double fn = 1.0 + jumps.max_f_norm();
    for (const auto& ie : mesh.interface_edges) {
        if (!ie.on_fault) continue;
        Segment seg = fault.segment(ie.segment_id);
        double L = seg.length();
        for (auto [p, m] : {std::pair{ie.plus_n1, ie.minus_n1}, std::pair{ie.plus_n2, ie.minus_n2}}) {
            if (p == m) continue;  // open-fault endpoint
            double t = dist(mesh.nodes[p], seg.a) / L;
            Vec2 jump = res.u.at(p) - res.u.at(m);
            Vec2 f = jumps.f_eval(ie.segment_id, t);
            res.diag.jump_error = std::max(res.diag.jump_error, norm(jump - f) / fn);
        }
    }
    for (int n : mesh.dirichlet_nodes())
        res.diag.dirichlet_error = std::max(res.diag.dirichlet_error, norm(res.u.at(n)));
    res.diag.symmetry_defect = sys.symmetry_defect();
    return res;
}

/// Reusable transmission solver: the stiffness factorizations depend only on
/// the mesh and material, so repeated solves with different jump data reuse
/// them (one factorization for the merged system, one for the lift).
class CachedTransmissionSolver {
public:
    CachedTransmissionSolver(const TransmissionMesh& mesh, const Material& material,
                             const FaultGeometry& fault)
        : mesh_(mesh), material_(material), fault_(fault), sys_(assemble(mesh, material)) {
        main_ldlt_.compute(sys_.reduced.Aff);
        if (main_ldlt_.info() != Eigen::Success)
            throw Error(ErrorKind::numeric, "sparse factorization failed (merged system)");

        // Lift system: outside-region triangles, Dirichlet on Gamma and the
        // whole outer boundary.
        std::vector<char> outside_node(mesh.nodes.size(), 0);
        for (const auto& t : mesh.triangles)
            if (t.region == 0)
                for (int e = 0; e < 3; ++e) outside_node[t.v[e]] = 1;
        std::set<int> bc_nodes;
        for (const auto& ie : mesh.interface_edges) {
            bc_nodes.insert(ie.plus_n1);
            bc_nodes.insert(ie.plus_n2);
        }
        for (const auto& be : mesh.boundary_edges) {
            bc_nodes.insert(be.n1);
            bc_nodes.insert(be.n2);
        }
        int ndofs = static_cast<int>(mesh.dof_count());
        std::vector<char> constrained(ndofs, 1);
        for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
            if (outside_node[n] && !bc_nodes.count(static_cast<int>(n))) {
                constrained[2 * n] = 0;
                constrained[2 * n + 1] = 0;
            }
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const auto& tri = mesh.triangles[t];
            if (tri.region != 0) continue;
            Mat6 K = element_stiffness(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]],
                                       mesh.nodes[tri.v[2]], material.at(t));
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b)
                    trips.emplace_back(2 * tri.v[a / 2] + a % 2, 2 * tri.v[b / 2] + b % 2,
                                       K(a, b));
        }
        lift_sys_ = reduce_system(trips, ndofs, constrained);
        if (lift_sys_.dof_of_free.size() > 0) {
            lift_ldlt_.compute(lift_sys_.Aff);
            if (lift_ldlt_.info() != Eigen::Success)
                throw Error(ErrorKind::numeric, "sparse factorization failed (lift system)");
        }
    }

    const TransmissionMesh& mesh() const { return mesh_; }

    DisplacementField lift(const JumpData& jumps) const {
        DisplacementField out = DisplacementField::zeros(mesh_);
        auto bc = boundary_values_from_jumps(mesh_, fault_, jumps);
        Eigen::VectorXd uc = Eigen::VectorXd::Zero(lift_sys_.constrained_dofs.size());
        for (std::size_t k = 0; k < lift_sys_.constrained_dofs.size(); ++k) {
            int d = lift_sys_.constrained_dofs[k];
            auto it = bc.find(d / 2);
            if (it != bc.end()) uc[k] = d % 2 == 0 ? it->second.x : it->second.y;
        }
        if (lift_sys_.dof_of_free.size() > 0) {
            Eigen::VectorXd x = lift_ldlt_.solve(-(lift_sys_.Afc * uc));
            for (std::size_t k = 0; k < lift_sys_.dof_of_free.size(); ++k)
                out.nodal[lift_sys_.dof_of_free[k]] = x[k];
        }
        for (const auto& [n, v] : bc) out.set(n, v);
        return out;
    }

    SolveResult solve(const JumpData& jumps) const {
        jumps.validate(fault_);
        DisplacementField lf = DisplacementField::zeros(mesh_);
        if (!jumps.all_zero_f()) lf = lift(jumps);

        Eigen::VectorXd rhs_full = Eigen::VectorXd::Zero(2 * sys_.n_wnodes);
        static const double gauss2[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
        for (const auto& ie : mesh_.interface_edges) {
            if (!ie.on_fault) continue;
            Segment seg = fault_.segment(ie.segment_id);
            double L = seg.length();
            Vec2 a = mesh_.nodes[ie.plus_n1], b = mesh_.nodes[ie.plus_n2];
            double ta = dist(a, seg.a) / L, tb = dist(b, seg.a) / L;
            double elen = dist(a, b);
            for (double q : gauss2) {
                double t = ta + (tb - ta) * q;
                Vec2 g = jumps.g_eval(ie.segment_id, t);
                double w = 0.5 * elen;
                rhs_full[sys_.wdof(ie.plus_n1, 0)] -= w * g.x * (1.0 - q);
                rhs_full[sys_.wdof(ie.plus_n1, 1)] -= w * g.y * (1.0 - q);
                rhs_full[sys_.wdof(ie.plus_n2, 0)] -= w * g.x * q;
                rhs_full[sys_.wdof(ie.plus_n2, 1)] -= w * g.y * q;
            }
        }
        if (!jumps.all_zero_f()) {
            for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
                const auto& tri = mesh_.triangles[t];
                if (tri.region != 0) continue;
                Mat6 K = element_stiffness(mesh_.nodes[tri.v[0]], mesh_.nodes[tri.v[1]],
                                           mesh_.nodes[tri.v[2]], material_.at(t));
                Vec6 ul;
                for (int i = 0; i < 3; ++i) {
                    Vec2 v = lf.at(tri.v[i]);
                    ul[2 * i] = v.x;
                    ul[2 * i + 1] = v.y;
                }
                Vec6 y = K * ul;
                for (int i = 0; i < 3; ++i)
                    for (int c = 0; c < 2; ++c) rhs_full[sys_.wdof(tri.v[i], c)] -= y[2 * i + c];
            }
        }
        Eigen::VectorXd rhs(sys_.reduced.dof_of_free.size());
        for (std::size_t k = 0; k < sys_.reduced.dof_of_free.size(); ++k)
            rhs[k] = rhs_full[sys_.reduced.dof_of_free[k]];
        Eigen::VectorXd wfree = main_ldlt_.solve(rhs);

        SolveResult res;
        res.u = DisplacementField::zeros(mesh_);
        res.lift = lf;
        for (std::size_t n = 0; n < mesh_.nodes.size(); ++n) {
            int wn = sys_.wnode_of_node[n];
            int fi = sys_.reduced.free_of_dof[2 * wn];
            int fj = sys_.reduced.free_of_dof[2 * wn + 1];
            Vec2 wv{fi >= 0 ? wfree[fi] : 0.0, fj >= 0 ? wfree[fj] : 0.0};
            res.u.set(static_cast<int>(n), wv + lf.at(static_cast<int>(n)));
        }
        return res;
    }

private:
    const TransmissionMesh& mesh_;
    Material material_;
    FaultGeometry fault_;
    SparseSystem sys_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> main_ldlt_;
    ReducedSystem lift_sys_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> lift_ldlt_;
};

// ---------------------------------------------------------------------------
// Traces and field evaluation.
// ---------------------------------------------------------------------------

struct TraceSample {
    Vec2 point;
    Vec2 displacement;
    Vec2 traction;
};

struct EdgeTrace {
    TraceSample start, mid, end;
};

namespace detail {

inline std::size_t triangle_with_nodes(const TransmissionMesh& mesh, int a, int b) {
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        int hits = 0;
        for (int e = 0; e < 3; ++e)
            if (mesh.triangles[t].v[e] == a || mesh.triangles[t].v[e] == b) ++hits;
        if (hits == 2) return t;
    }
    throw Error(ErrorKind::geometry, "no triangle adjacent to the requested edge");
}

}  // namespace detail

/// One-sided displacement/traction samples along a boundary edge.
inline EdgeTrace boundary_trace(const DisplacementField& u, const Material& material,
                                const TransmissionMesh::BoundaryEdge& be) {
    const TransmissionMesh& mesh = *u.mesh;
    std::size_t t = detail::triangle_with_nodes(mesh, be.n1, be.n2);
    Mat2 grad = u.gradient_on(t);
    Vec2 a = mesh.nodes[be.n1], b = mesh.nodes[be.n2];
    Vec2 nu = normalized(perp(b - a));
    Vec2 c = (mesh.nodes[mesh.triangles[t].v[0]] + mesh.nodes[mesh.triangles[t].v[1]] +
              mesh.nodes[mesh.triangles[t].v[2]]) /
             3.0;
    if (dot(c - (a + b) * 0.5, nu) > 0.0) nu = -nu;  // outward of the body
    Vec2 tr = traction(grad, material.at(t), nu);
    EdgeTrace et;
    et.start = {a, u.at(be.n1), tr};
    et.end = {b, u.at(be.n2), tr};
    et.mid = {(a + b) * 0.5, (u.at(be.n1) + u.at(be.n2)) * 0.5, tr};
    return et;
}

/// One-sided samples along an interface edge; side selects the plus or minus
/// copies (and the adjacent region's gradient).
inline EdgeTrace interface_trace(const DisplacementField& u, const Material& material,
                                 const TransmissionMesh::InterfaceEdge& ie, EdgeSide side) {
    const TransmissionMesh& mesh = *u.mesh;
    int n1 = side == EdgeSide::plus ? ie.plus_n1 : ie.minus_n1;
    int n2 = side == EdgeSide::plus ? ie.plus_n2 : ie.minus_n2;
    std::size_t t = detail::triangle_with_nodes(mesh, n1, n2);
    Mat2 grad = u.gradient_on(t);
    Vec2 nu = interface_edge_normal(mesh, ie);  // plus-ward on both sides
    Vec2 tr = traction(grad, material.at(t), nu);
    Vec2 a = mesh.nodes[n1], b = mesh.nodes[n2];
    EdgeTrace et;
    et.start = {a, u.at(n1), tr};
    et.end = {b, u.at(n2), tr};
    et.mid = {(a + b) * 0.5, (u.at(n1) + u.at(n2)) * 0.5, tr};
    return et;
}

/// Point evaluator with a coarse bin grid; side hints resolve on-fault points.
class FieldEvaluator {
public:
    FieldEvaluator(const DisplacementField& u, const Material& material)
        : u_(u), mesh_(*u.mesh), material_(material) {
        Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
        for (const auto& p : mesh_.nodes) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
        lo_ = lo;
        cell_ = std::max(hi.x - lo.x, hi.y - lo.y) / 64.0 + 1e-300;
        bins_.resize(65 * 65);
        for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
            Vec2 tlo(1e300, 1e300), thi(-1e300, -1e300);
            for (int e = 0; e < 3; ++e) {
                const Vec2& p = mesh_.nodes[mesh_.triangles[t].v[e]];
                tlo.x = std::min(tlo.x, p.x);
                tlo.y = std::min(tlo.y, p.y);
                thi.x = std::max(thi.x, p.x);
                thi.y = std::max(thi.y, p.y);
            }
            for (int i = idx(tlo.x - lo_.x); i <= idx(thi.x - lo_.x); ++i)
                for (int j = idx(tlo.y - lo_.y); j <= idx(thi.y - lo_.y); ++j)
                    bins_[i * 65 + j].push_back(t);
        }
    }

    /// Triangle containing p (region_hint breaks ties on the fault), or npos.
    std::size_t locate(const Vec2& p, int region_hint = -1) const {
        int i = idx(p.x - lo_.x), j = idx(p.y - lo_.y);
        std::size_t best = npos;
        for (std::size_t t : bins_[i * 65 + j]) {
            if (!contains(t, p)) continue;
            if (region_hint < 0 || mesh_.triangles[t].region == region_hint) return t;
            if (best == npos) best = t;
        }
        return best;
    }

    Vec2 value(const Vec2& p, int region_hint = -1) const {
        std::size_t t = locate(p, region_hint);
        if (t == npos) throw Error(ErrorKind::geometry, "evaluation point outside the mesh");
        return interpolate(t, p);
    }

    Mat2 gradient(const Vec2& p, int region_hint = -1) const {
        std::size_t t = locate(p, region_hint);
        if (t == npos) throw Error(ErrorKind::geometry, "evaluation point outside the mesh");
        return u_.gradient_on(t);
    }

    Vec2 traction_at(const Vec2& p, const Vec2& nu, int region_hint = -1) const {
        std::size_t t = locate(p, region_hint);
        if (t == npos) throw Error(ErrorKind::geometry, "evaluation point outside the mesh");
        return traction(u_.gradient_on(t), material_.at(t), nu);
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    int idx(double d) const { return std::clamp(static_cast<int>(d / cell_), 0, 64); }

    bool contains(std::size_t t, const Vec2& p) const {
        const auto& tr = mesh_.triangles[t];
        const Vec2& a = mesh_.nodes[tr.v[0]];
        const Vec2& b = mesh_.nodes[tr.v[1]];
        const Vec2& c = mesh_.nodes[tr.v[2]];
        double A2 = cross(b - a, c - a);
        double l0 = cross(b - p, c - p) / A2;
        double l1 = cross(c - p, a - p) / A2;
        double l2 = cross(a - p, b - p) / A2;
        double eps = -1e-12;
        return l0 >= eps && l1 >= eps && l2 >= eps;
    }

    Vec2 interpolate(std::size_t t, const Vec2& p) const {
        const auto& tr = mesh_.triangles[t];
        const Vec2& a = mesh_.nodes[tr.v[0]];
        const Vec2& b = mesh_.nodes[tr.v[1]];
        const Vec2& c = mesh_.nodes[tr.v[2]];
        double A2 = cross(b - a, c - a);
        double l0 = cross(b - p, c - p) / A2;
        double l1 = cross(c - p, a - p) / A2;
        double l2 = cross(a - p, b - p) / A2;
        return u_.at(tr.v[0]) * l0 + u_.at(tr.v[1]) * l1 + u_.at(tr.v[2]) * l2;
    }

    const DisplacementField& u_;
    const TransmissionMesh& mesh_;
    Material material_;
    Vec2 lo_;
    double cell_ = 1.0;
    std::vector<std::vector<std::size_t>> bins_;
};

// ---------------------------------------------------------------------------
// Betti reciprocity residual.
// ---------------------------------------------------------------------------

/// Complex stress and traction for complex-valued gradients.
inline Mat2c stress_c(const Mat2c& grad, const LameParams& p) {
    Complex tr = grad[0][0] + grad[1][1];
    Mat2c s;
    s[0][0] = p.lambda * tr + 2.0 * p.mu * grad[0][0];
    s[1][1] = p.lambda * tr + 2.0 * p.mu * grad[1][1];
    s[0][1] = p.mu * (grad[0][1] + grad[1][0]);
    s[1][0] = s[0][1];
    return s;
}

inline Vec2c traction_c(const Mat2c& grad, const LameParams& p, const Vec2& nu) {
    Mat2c s = stress_c(grad, p);
    return {s[0][0] * nu.x + s[0][1] * nu.y, s[1][0] * nu.x + s[1][1] * nu.y};
}

/// Field abstraction for reciprocity checks: complex value and gradient.
struct AnalyticField {
    std::function<Vec2c(const Vec2&)> value;
    std::function<Mat2c(const Vec2&)> grad;

    static AnalyticField linear(const Mat2& B, const Vec2& c) {
        return {[B, c](const Vec2& x) {
                    return Vec2c{Complex(B[0][0] * x.x + B[0][1] * x.y + c.x),
                                 Complex(B[1][0] * x.x + B[1][1] * x.y + c.y)};
                },
                [B](const Vec2&) {
                    return Mat2c{{{Complex(B[0][0]), Complex(B[0][1])},
                                  {Complex(B[1][0]), Complex(B[1][1])}}};
                }};
    }

    static AnalyticField cgo(double s) {
        return {[s](const Vec2& x) { return cgo_eval(x, s); },
                [s](const Vec2& x) { return cgo_grad(x, s); }};
    }

    static AnalyticField fem(const FieldEvaluator& ev, int region_hint = -1) {
        return {[&ev, region_hint](const Vec2& x) {
                    Vec2 v = ev.value(x, region_hint);
                    return Vec2c{Complex(v.x), Complex(v.y)};
                },
                [&ev, region_hint](const Vec2& x) {
                    Mat2 g = ev.gradient(x, region_hint);
                    return Mat2c{{{Complex(g[0][0]), Complex(g[0][1])},
                                  {Complex(g[1][0]), Complex(g[1][1])}}};
                }};
    }
};

/// Contour integral of (T v . w - T w . v) over a closed piecewise-linear
/// curve; zero for two elastic equilibria inside the loop. The loop must be
/// passed closed (first point repeated last) and is traversed as given, with
/// the normal on the right of travel (outward for counterclockwise loops).
inline Complex betti_residual(const AnalyticField& v, const AnalyticField& w,
                              const std::vector<Vec2>& loop, const LameParams& params,
                              int panels_per_segment = 8) {
    if (loop.size() < 4 || dist(loop.front(), loop.back()) > 1e-14)
        throw Error(ErrorKind::validation, "reciprocity contour must be a closed curve");
    Complex acc{};
    for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
        Segment seg{loop[i], loop[i + 1]};
        Vec2 nu = -perp(seg.direction());
        auto f = [&](double t) {
            Vec2 x = seg.at(t);
            Vec2c tv = traction_c(v.grad(x), params, nu);
            Vec2c tw = traction_c(w.grad(x), params, nu);
            return dot_bilinear(tv, w.value(x)) - dot_bilinear(tw, v.value(x));
        };
        acc += composite_gauss16(f, 0.0, 1.0, panels_per_segment) * seg.length();
    }
    return acc;
}

}  // namespace faultlab
