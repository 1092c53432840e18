#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "faultlab/mesh.hpp"
#include "faultlab/parallel.hpp"
#include "faultlab/probe.hpp"
#include "faultlab/rng.hpp"
#include "faultlab/solve.hpp"

namespace faultlab {

/// Fixed scene shared by all hypotheses: body, material, boundary tags, mesh
/// size, solver settings, and the canonical observation grid on the
/// observation sub-arc (defined in boundary arc length, mesh-independent).
struct Scene {
    DomainPolygon domain;
    Material material;
    double h_mesh = 0.05;
    double clearance_fraction = 0.05;
    double grading_radius = 0.0;  // corner grading of hypothesis meshes
    double grading_floor = 0.25;
    SolverOptions solver;
    int n_observations = 64;
};

/// Candidate fault with piecewise-constant jump vectors per segment.
struct FaultHypothesis {
    bool closed = true;
    std::vector<Vec2> vertices;
    std::vector<Vec2> f_const;  // one per segment
    std::vector<Vec2> g_const;

    std::size_t segment_count() const {
        return closed ? vertices.size() : vertices.size() - 1;
    }

    /// Removes the vertex-relabeling symmetry of closed polygons: vertices
    /// sorted counterclockwise by angle about the centroid, starting at the
    /// smallest angle. Jump constants follow their segments.
    void canonicalize() {
        if (!closed || vertices.size() < 3) return;
        Vec2 c{0.0, 0.0};
        for (const auto& v : vertices) c += v;
        c = c / static_cast<double>(vertices.size());
        std::vector<std::size_t> order(vertices.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto angle = [&](std::size_t i) {
            return std::atan2(vertices[i].y - c.y, vertices[i].x - c.x);
        };
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return angle(a) < angle(b); });
        std::vector<Vec2> nv(vertices.size());
        std::vector<Vec2> nf(vertices.size()), ng(vertices.size());
        bool have_jumps = f_const.size() == vertices.size() && g_const.size() == vertices.size();
        for (std::size_t k = 0; k < order.size(); ++k) {
            nv[k] = vertices[order[k]];
            if (have_jumps) {
                nf[k] = f_const[order[k]];
                ng[k] = g_const[order[k]];
            }
        }
        vertices = nv;
        if (have_jumps) {
            f_const = nf;
            g_const = ng;
        }
    }

    /// Geometry parameter vector (vertex coordinates, flattened).
    std::vector<double> encode_geometry() const {
        std::vector<double> p;
        for (const auto& v : vertices) {
            p.push_back(v.x);
            p.push_back(v.y);
        }
        return p;
    }

    void decode_geometry(const std::vector<double>& p) {
        if (p.size() != 2 * vertices.size())
            throw Error(ErrorKind::validation, "geometry parameter size mismatch");
        for (std::size_t i = 0; i < vertices.size(); ++i) vertices[i] = {p[2 * i], p[2 * i + 1]};
        canonicalize();
    }

    FaultGeometry to_fault(const DomainPolygon& domain) const {
        FaultGeometry f;
        f.vertices = vertices;
        f.closed = closed;
        f.finalize(domain);
        return f;
    }

    JumpData to_jumps() const {
        JumpData j = JumpData::zeros(segment_count());
        if (f_const.size() != segment_count() || g_const.size() != segment_count())
            throw Error(ErrorKind::validation, "hypothesis jump tables must match segments");
        for (std::size_t k = 0; k < segment_count(); ++k) {
            j.f[k] = SegmentTrace::constant(f_const[k]);
            j.g[k] = SegmentTrace::constant(g_const[k]);
        }
        return j;
    }
};

/// Displacement samples on the observation sub-arc at canonical arc-length
/// stations (independent of any mesh).
struct Observation {
    std::vector<double> arc;  // station positions along the observation arc
    std::vector<Vec2> u;

    double norm2() const {
        double s = 0.0;
        for (const auto& v : u) s += dot(v, v);
        return s;
    }
    double distance2(const Observation& o) const {
        if (o.u.size() != u.size())
            throw Error(ErrorKind::validation, "observation grids do not match");
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            Vec2 d = u[i] - o.u[i];
            s += dot(d, d);
        }
        return s;
    }
};

namespace inv_detail {

struct ObservationStations {
    // Sorted observation boundary pieces with cumulative arc coordinates.
    struct Piece {
        double lo, hi;      // cumulative observation arc range
        double arc0, arc1;  // full-boundary arc range (mesh edge)
        int n1, n2;
    };
    std::vector<Piece> pieces;
    double total = 0.0;
};

inline ObservationStations observation_pieces(const TransmissionMesh& mesh) {
    ObservationStations st;
    std::vector<const TransmissionMesh::BoundaryEdge*> obs;
    for (const auto& be : mesh.boundary_edges)
        if (be.tag == MeshBoundaryTag::observation) obs.push_back(&be);
    std::sort(obs.begin(), obs.end(),
              [](auto* a, auto* b) { return a->arc0 < b->arc0; });
    double acc = 0.0;
    for (auto* be : obs) {
        double len = be->arc1 - be->arc0;
        st.pieces.push_back({acc, acc + len, be->arc0, be->arc1, be->n1, be->n2});
        acc += len;
    }
    st.total = acc;
    if (st.pieces.empty())
        throw Error(ErrorKind::validation, "scene has no observation boundary edges");
    return st;
}

}  // namespace inv_detail

/// Samples a solved field at the canonical observation stations.
inline Observation observe(const DisplacementField& u, int n_samples) {
    auto st = inv_detail::observation_pieces(*u.mesh);
    Observation obs;
    for (int i = 0; i < n_samples; ++i) {
        double a = (i + 0.5) / n_samples * st.total;
        const auto* piece = &st.pieces.back();
        for (const auto& p : st.pieces)
            if (a >= p.lo && a <= p.hi) {
                piece = &p;
                break;
            }
        double t = (a - piece->lo) / (piece->hi - piece->lo);
        Vec2 val = u.at(piece->n1) * (1.0 - t) + u.at(piece->n2) * t;
        obs.arc.push_back(a);
        obs.u.push_back(val);
    }
    return obs;
}

/// Forward map: meshes the hypothesis scene, solves the transmission problem,
/// and samples the observation arc. Throws on undecodable geometry; callers
/// inside the optimizer convert that into an infinite-misfit sentinel.
inline Observation forward(const FaultHypothesis& hyp, const Scene& scene,
                           std::optional<double> h_override = std::nullopt) {
    FaultGeometry fault = hyp.to_fault(scene.domain);
    double h = h_override.value_or(scene.h_mesh);
    MeshingInput in{scene.domain, fault, {}};
    if (!fault.closed) in.gamma0 = close_open_fault(fault, scene.domain,
                                                    scene.clearance_fraction).gamma0;
    TransmissionMesh mesh = build_mesh(in, h, scene.grading_radius, scene.grading_floor);
    SolveResult sol = solve_direct(mesh, scene.material, fault, hyp.to_jumps(), scene.solver);
    return observe(sol.u, scene.n_observations);
}

/// Half squared distance between predicted and measured observations.
inline double misfit(const FaultHypothesis& hyp, const Scene& scene, const Observation& measured) {
    Observation pred = forward(hyp, scene);
    for (std::size_t i = 0; i < pred.arc.size(); ++i)
        if (std::abs(pred.arc[i] - measured.arc[i]) > 1e-9)
            throw Error(ErrorKind::validation, "observation grids do not match");
    return 0.5 * pred.distance2(measured);
}

inline Observation add_noise(const Observation& obs, double rel_level, std::uint64_t seed) {
    double scale = 0.0;
    for (const auto& v : obs.u) scale = std::max(scale, norm(v));
    Rng rng(seed);
    Observation out = obs;
    for (auto& v : out.u) {
        v.x += rel_level * scale * rng.normal();
        v.y += rel_level * scale * rng.normal();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Separable least squares for the jump constants at fixed geometry.
// ---------------------------------------------------------------------------

struct IdentifiabilityReport {
    double condition = 0.0;
    int null_dimension = 0;
    std::vector<double> singular_values;
};

struct JumpFitResult {
    std::vector<Vec2> f_const, g_const;
    double misfit = 0.0;
    IdentifiabilityReport ident;
};

/// Which per-segment constants the linear stage solves for. Slip-only treats
/// the traction jump as known (kept at the hypothesis values).
enum class JumpUnknowns { slip_only, slip_and_traction };

/// Fits per-segment constant jumps by linear least squares against the
/// measured observation (the forward map is linear in the jumps at fixed
/// geometry: one unit-jump solve per basis column, all sharing one mesh and
/// one factorization). Rank-deficient directions are truncated; the
/// identifiability report carries the spectrum and null dimension.
inline JumpFitResult fit_jumps(const FaultHypothesis& geometry, const Scene& scene,
                               const Observation& measured,
                               JumpUnknowns unknowns = JumpUnknowns::slip_and_traction,
                               double svd_cutoff = 1e-10) {
    std::size_t m = geometry.segment_count();
    int per_seg = unknowns == JumpUnknowns::slip_only ? 2 : 4;
    std::size_t ncols = per_seg * m;
    std::size_t nrows = 2 * measured.u.size();
    Eigen::MatrixXd Phi(nrows, ncols);

    FaultGeometry fault = geometry.to_fault(scene.domain);
    MeshingInput min{scene.domain, fault, {}};
    if (!fault.closed)
        min.gamma0 = close_open_fault(fault, scene.domain, scene.clearance_fraction).gamma0;
    TransmissionMesh mesh = build_mesh(min, scene.h_mesh, scene.grading_radius, scene.grading_floor);
    CachedTransmissionSolver solver(mesh, scene.material, fault);

    for (std::size_t k = 0; k < m; ++k) {
        for (int comp = 0; comp < per_seg; ++comp) {
            JumpData jumps = JumpData::zeros(m);
            if (comp == 0) jumps.f[k] = SegmentTrace::constant({1.0, 0.0});
            if (comp == 1) jumps.f[k] = SegmentTrace::constant({0.0, 1.0});
            if (comp == 2) jumps.g[k] = SegmentTrace::constant({1.0, 0.0});
            if (comp == 3) jumps.g[k] = SegmentTrace::constant({0.0, 1.0});
            Observation col = observe(solver.solve(jumps).u, scene.n_observations);
            for (std::size_t i = 0; i < col.u.size(); ++i) {
                Phi(2 * i, per_seg * k + comp) = col.u[i].x;
                Phi(2 * i + 1, per_seg * k + comp) = col.u[i].y;
            }
        }
    }
    Eigen::VectorXd d(nrows);
    for (std::size_t i = 0; i < measured.u.size(); ++i) {
        d[2 * i] = measured.u[i].x;
        d[2 * i + 1] = measured.u[i].y;
    }
    if (unknowns == JumpUnknowns::slip_only) {
        // Subtract the known traction-jump contribution.
        JumpData jumps = JumpData::zeros(m);
        for (std::size_t k = 0; k < m; ++k)
            jumps.g[k] = SegmentTrace::constant(geometry.g_const.empty() ? Vec2{0.0, 0.0}
                                                                         : geometry.g_const[k]);
        Observation gpart = observe(solver.solve(jumps).u, scene.n_observations);
        for (std::size_t i = 0; i < gpart.u.size(); ++i) {
            d[2 * i] -= gpart.u[i].x;
            d[2 * i + 1] -= gpart.u[i].y;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    JumpFitResult res;
    for (int i = 0; i < sv.size(); ++i) res.ident.singular_values.push_back(sv[i]);
    double smax = sv.size() ? sv[0] : 0.0;
    double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    res.ident.condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] < svd_cutoff * smax) ++res.ident.null_dimension;

    // Truncated-SVD solve: drop directions below the cutoff.
    Eigen::VectorXd ut_d = svd.matrixU().transpose() * d;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(ncols);
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] >= svd_cutoff * smax) c += (ut_d[i] / sv[i]) * svd.matrixV().col(i);

    res.f_const.resize(m);
    res.g_const.assign(m, {0.0, 0.0});
    for (std::size_t k = 0; k < m; ++k) {
        res.f_const[k] = {c[per_seg * k], c[per_seg * k + 1]};
        if (per_seg == 4) res.g_const[k] = {c[4 * k + 2], c[4 * k + 3]};
        else if (!geometry.g_const.empty())
            res.g_const[k] = geometry.g_const[k];
    }
    Eigen::VectorXd r = Phi * c - d;
    res.misfit = 0.5 * r.squaredNorm();
    return res;
}

// ---------------------------------------------------------------------------
// Reconstruction: compass search over geometry, least squares over jumps.
// ---------------------------------------------------------------------------

struct ReconstructionConfig {
    std::uint64_t seed = 1;
    int max_geometry_iters = 40;
    double initial_step_fraction = 0.04;  // of the domain diameter
    double min_step_fraction = 5e-4;
    double misfit_tolerance = 1e-14;
    JumpUnknowns unknowns = JumpUnknowns::slip_and_traction;
    double svd_cutoff = 1e-10;  // relative truncation of the jump least squares
};

struct ReconstructionResult {
    FaultHypothesis best;
    double best_misfit = 0.0;
    std::vector<double> misfit_trace;  // accepted values, non-increasing
    IdentifiabilityReport ident;
    int geometry_steps = 0;
    int forward_solves = 0;
};

inline ReconstructionResult reconstruct(const Observation& measured,
                                        const FaultHypothesis& initial, const Scene& scene,
                                        const ReconstructionConfig& cfg = {}) {
    ReconstructionResult res;
    double diam = scene.domain.diameter();

    auto evaluate = [&](const FaultHypothesis& geom) -> std::optional<JumpFitResult> {
        try {
            return fit_jumps(geom, scene, measured, cfg.unknowns, cfg.svd_cutoff);
        } catch (const Error&) {
            return std::nullopt;  // invalid trial geometry: infinite misfit
        }
    };

    FaultHypothesis cur = initial;
    cur.canonicalize();
    auto cur_fit = evaluate(cur);
    if (!cur_fit)
        throw Error(ErrorKind::validation, "initial hypothesis does not decode to a valid fault");
    cur.f_const = cur_fit->f_const;
    cur.g_const = cur_fit->g_const;
    double cur_misfit = cur_fit->misfit;
    res.misfit_trace.push_back(cur_misfit);
    res.ident = cur_fit->ident;

    double step = cfg.initial_step_fraction * diam;
    std::vector<double> p = cur.encode_geometry();

    for (int iter = 0; iter < cfg.max_geometry_iters; ++iter) {
        if (cur_misfit < cfg.misfit_tolerance || step < cfg.min_step_fraction * diam) break;
        bool improved = false;
        double best_trial_misfit = cur_misfit;
        std::vector<double> best_p;
        JumpFitResult best_fit;

        // Independent trial hypotheses evaluated on a worker pool; the winner
        // is picked by misfit with the trial index as a deterministic
        // tie-break.
        std::vector<FaultHypothesis> trials;
        for (std::size_t i = 0; i < p.size(); ++i) {
            for (double sgn : {+1.0, -1.0}) {
                std::vector<double> q = p;
                q[i] += sgn * step;
                FaultHypothesis trial = cur;
                try {
                    trial.decode_geometry(q);
                } catch (const Error&) {
                    continue;
                }
                trials.push_back(trial);
            }
        }
        std::vector<std::optional<JumpFitResult>> fits(trials.size());
        parallel_for_index(trials.size(),
                           [&](std::size_t i) { fits[i] = evaluate(trials[i]); });
        for (std::size_t i = 0; i < trials.size(); ++i) {
            if (!fits[i]) continue;
            res.forward_solves += static_cast<int>(4 * trials[i].segment_count());
            if (fits[i]->misfit < best_trial_misfit) {
                best_trial_misfit = fits[i]->misfit;
                best_p = trials[i].encode_geometry();
                best_fit = *fits[i];
                improved = true;
            }
        }
        if (improved) {
            p = best_p;
            cur.decode_geometry(p);
            cur.f_const = best_fit.f_const;
            cur.g_const = best_fit.g_const;
            cur_misfit = best_fit.misfit;
            res.ident = best_fit.ident;
            res.misfit_trace.push_back(cur_misfit);
            res.geometry_steps++;
        } else {
            step *= 0.5;
        }
    }

    res.best = cur;
    res.best_misfit = cur_misfit;
    return res;
}

// ---------------------------------------------------------------------------
// Distinguishability and the closed-fault residual jump freedom.
// ---------------------------------------------------------------------------

struct DistinguishabilityResult {
    double absolute = 0.0;
    double relative = 0.0;  // ||F(A) - F(B)|| / ||F(A)||
};

/// Forward-data separation of two admissible hypotheses on the observation arc.
inline DistinguishabilityResult distinguishability_experiment(const FaultHypothesis& a,
                                                              const FaultHypothesis& b,
                                                              const Scene& scene) {
    for (const auto* h : {&a, &b}) {
        FaultGeometry fg = h->to_fault(scene.domain);
        auto rep = admissibility_check(fg, h->to_jumps());
        if (!rep.admissible) {
            std::string msg = "hypothesis not admissible; failing corners:";
            for (const auto& c : rep.corners)
                if (!c.admissible) msg += " " + std::to_string(c.vertex);
            throw Error(ErrorKind::validation, msg);
        }
    }
    Observation fa = forward(a, scene);
    Observation fb = forward(b, scene);
    DistinguishabilityResult r;
    r.absolute = std::sqrt(fa.distance2(fb));
    r.relative = r.absolute / std::sqrt(std::max(fa.norm2(), 1e-300));
    return r;
}

/// Jump-difference pattern that single-measurement data cannot see on a
/// closed polygonal fault: a common constant added to every segment's f and a
/// traction difference chained by the corner reflections around the polygon.
inline void apply_null_pattern(FaultHypothesis& hyp, const DomainPolygon& domain, const Vec2& df,
                               const Vec2& dg_first) {
    FaultGeometry fg = hyp.to_fault(domain);
    std::size_t m = hyp.segment_count();
    for (std::size_t k = 0; k < m; ++k) hyp.f_const[k] += df;
    if (dg_first.x == 0.0 && dg_first.y == 0.0) return;
    Vec2 dg = dg_first;
    hyp.g_const[0] += dg;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        // Segment k and k+1 share vertex k+1.
        auto it = fg.frames.find(k + 1);
        if (it == fg.frames.end())
            throw Error(ErrorKind::geometry, "null-pattern chain needs a frame at every corner");
        dg = w_matrix(it->second.opening()).apply(dg);
        hyp.g_const[k + 1] += dg;
    }
}

}  // namespace faultlab
