#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "faultlab/elasticity.hpp"
#include "faultlab/mesh.hpp"

namespace faultlab {

/// Per-triangle material description (constant Lame pair per triangle).
struct Material {
    LameParams base;
    std::vector<LameParams> per_triangle;  // optional; indexed by triangle id

    LameParams at(std::size_t tri) const {
        return per_triangle.empty() ? base : per_triangle.at(tri);
    }

    void validate(std::size_t n_triangles) const {
        base.validate();
        if (!per_triangle.empty()) {
            if (per_triangle.size() != n_triangles)
                throw Error(ErrorKind::validation,
                            "per-triangle material table size mismatch");
            for (std::size_t t = 0; t < per_triangle.size(); ++t)
                if (!per_triangle[t].strongly_convex())
                    throw Error(ErrorKind::validation,
                                "strong convexity violated on triangle " + std::to_string(t));
        }
    }
};

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// P1 element stiffness for the form
///   int_K lambda (div u)(div v) + 2 mu eps(u) : eps(v).
/// Dof order: (n0 x, n0 y, n1 x, n1 y, n2 x, n2 y).
inline Mat6 element_stiffness(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                              const LameParams& mat) {
    double A2 = cross(p1 - p0, p2 - p0);  // twice the signed area
    if (A2 <= 0.0) throw Error(ErrorKind::geometry, "element with non-positive area");
    double area = 0.5 * A2;
    // Barycentric gradients.
    Vec2 g[3];
    const Vec2 p[3] = {p0, p1, p2};
    for (int i = 0; i < 3; ++i) {
        Vec2 e = p[(i + 1) % 3] - p[(i + 2) % 3];
        g[i] = Vec2{e.y, -e.x} / A2;
    }
    Mat6 K;
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 2; ++c)
            for (int j = 0; j < 3; ++j)
                for (int d = 0; d < 2; ++d) {
                    double gic = c == 0 ? g[i].x : g[i].y;
                    double gjd = d == 0 ? g[j].x : g[j].y;
                    double gid = d == 0 ? g[i].x : g[i].y;
                    double gjc = c == 0 ? g[j].x : g[j].y;
                    double val = mat.lambda * gic * gjd +
                                 mat.mu * ((c == d ? dot(g[i], g[j]) : 0.0) + gid * gjc);
                    K(2 * i + c, 2 * j + d) = area * val;
                }
    return K;
}

/// Symmetric system with eliminated Dirichlet dofs. Aff acts on free dofs;
/// Afc carries couplings to constrained dofs for inhomogeneous data.
struct ReducedSystem {
    Eigen::SparseMatrix<double> Aff;
    Eigen::SparseMatrix<double> Afc;
    std::vector<int> free_of_dof;  // -1 where constrained
    std::vector<int> dof_of_free;
    std::vector<int> constrained_dofs;
};

inline ReducedSystem reduce_system(const std::vector<Eigen::Triplet<double>>& trips, int ndofs,
                                   const std::vector<char>& constrained) {
    ReducedSystem sys;
    sys.free_of_dof.assign(ndofs, -1);
    for (int d = 0; d < ndofs; ++d) {
        if (constrained[d]) {
            sys.constrained_dofs.push_back(d);
        } else {
            sys.free_of_dof[d] = static_cast<int>(sys.dof_of_free.size());
            sys.dof_of_free.push_back(d);
        }
    }
    int nf = static_cast<int>(sys.dof_of_free.size());
    int nc = static_cast<int>(sys.constrained_dofs.size());
    std::vector<int> cons_index(ndofs, -1);
    for (int k = 0; k < nc; ++k) cons_index[sys.constrained_dofs[k]] = k;

    std::vector<Eigen::Triplet<double>> ff, fc;
    for (const auto& t : trips) {
        int fi = sys.free_of_dof[t.row()];
        int fj = sys.free_of_dof[t.col()];
        if (fi >= 0 && fj >= 0)
            ff.emplace_back(fi, fj, t.value());
        else if (fi >= 0 && fj < 0)
            fc.emplace_back(fi, cons_index[t.col()], t.value());
    }
    sys.Aff.resize(nf, nf);
    sys.Aff.setFromTriplets(ff.begin(), ff.end());
    sys.Afc.resize(nf, nc);
    sys.Afc.setFromTriplets(fc.begin(), fc.end());
    return sys;
}

/// Assembled variational system for the continuous (merged-interface) trial
/// space with Dirichlet-boundary dofs eliminated.
struct SparseSystem {
    ReducedSystem reduced;
    Eigen::VectorXd rhs;  // over free dofs; body-force load only
    int n_wnodes = 0;
    std::vector<int> wnode_of_node;  // node -> merged node index

    int wdof(int node, int comp) const { return 2 * wnode_of_node[node] + comp; }

    double symmetry_defect() const {
        Eigen::SparseMatrix<double> d = Eigen::SparseMatrix<double>(reduced.Aff.transpose()) -
                                        reduced.Aff;
        double mx = 0.0, ma = 0.0;
        for (int k = 0; k < d.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(d, k); it; ++it)
                mx = std::max(mx, std::abs(it.value()));
        for (int k = 0; k < reduced.Aff.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(reduced.Aff, k); it; ++it)
                ma = std::max(ma, std::abs(it.value()));
        return ma > 0 ? mx / ma : 0.0;
    }
};

using BodyForce = std::function<Vec2(const Vec2&)>;

/// Assembles the elastic bilinear form over the whole mesh in the merged
/// trial space, with zero-Dirichlet constraints on the clamped boundary.
/// The optional body force fills the load vector by mid-edge quadrature.
inline SparseSystem assemble(const TransmissionMesh& mesh, const Material& material,
                             const std::optional<BodyForce>& body = std::nullopt) {
    material.validate(mesh.triangles.size());

    SparseSystem sys;
    // Merged node numbering: minus copies share their plus representative.
    sys.wnode_of_node.assign(mesh.nodes.size(), -1);
    int next = 0;
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
        if (mesh.rep_node(static_cast<int>(n)) == static_cast<int>(n))
            sys.wnode_of_node[n] = next++;
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
        if (sys.wnode_of_node[n] < 0)
            sys.wnode_of_node[n] = sys.wnode_of_node[mesh.rep_node(static_cast<int>(n))];
    sys.n_wnodes = next;

    int ndofs = 2 * sys.n_wnodes;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * 36);
    Eigen::VectorXd load = Eigen::VectorXd::Zero(ndofs);

    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2& p0 = mesh.nodes[tri.v[0]];
        const Vec2& p1 = mesh.nodes[tri.v[1]];
        const Vec2& p2 = mesh.nodes[tri.v[2]];
        Mat6 K = element_stiffness(p0, p1, p2, material.at(t));
        int dofs[6];
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 2; ++c) dofs[2 * i + c] = sys.wdof(tri.v[i], c);
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) trips.emplace_back(dofs[a], dofs[b], K(a, b));

        if (body) {
            double area = 0.5 * cross(p1 - p0, p2 - p0);
            const Vec2 mids[3] = {(p0 + p1) * 0.5, (p1 + p2) * 0.5, (p2 + p0) * 0.5};
            // Hat values at opposite mid-edges: node i contributes 1/2 on its
            // two adjacent mid-edges and 0 on the opposite one.
            static const double hat[3][3] = {{0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}};
            for (int q = 0; q < 3; ++q) {
                Vec2 b = (*body)(mids[q]);
                for (int i = 0; i < 3; ++i) {
                    load[dofs[2 * i]] += area / 3.0 * hat[i][q] * b.x;
                    load[dofs[2 * i + 1]] += area / 3.0 * hat[i][q] * b.y;
                }
            }
        }
    }

    std::vector<char> constrained(ndofs, 0);
    for (int n : mesh.dirichlet_nodes()) {
        constrained[sys.wdof(n, 0)] = 1;
        constrained[sys.wdof(n, 1)] = 1;
    }
    sys.reduced = reduce_system(trips, ndofs, constrained);
    sys.rhs.resize(sys.reduced.dof_of_free.size());
    for (std::size_t k = 0; k < sys.reduced.dof_of_free.size(); ++k)
        sys.rhs[k] = load[sys.reduced.dof_of_free[k]];
    return sys;
}

}  // namespace faultlab
