#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <variant>
#include <vector>

#include "rodopt/bernstein.hpp"

namespace rodopt {

struct ConvexPolytope {
    std::vector<Eigen::Vector3d> vertices;
};

struct SphereObstacle {
    Eigen::Vector3d center;
    double radius = 0.0;
};

using Obstacle = std::variant<ConvexPolytope, SphereObstacle>;

struct ClearanceQuery {
    double epsilon = 0.0;
    int max_depth = 6;
};

struct DistanceBounds {
    double lower = 0.0;         // certified lower bound on the minimum distance
    double upper = 0.0;         // distance at the best surface point found
    double signed_lower = 0.0;  // spheres: hull-to-center minus radius, unclamped
};

namespace detail {

// Closest point to the origin on the convex hull of up to four points.
// Enumerates sub-simplices, keeps the best one with nonnegative barycentric
// coordinates, and writes the retained vertices back into the simplex.
inline double reduce_simplex(std::vector<Eigen::Vector3d>& simplex, Eigen::Vector3d& closest) {
    const int n = static_cast<int>(simplex.size());
    double best = std::numeric_limits<double>::infinity();
    int best_mask = 0;
    Eigen::Vector3d best_point = Eigen::Vector3d::Zero();

    for (int mask = 1; mask < (1 << n); ++mask) {
        Eigen::Vector3d pts[4];
        int k = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) pts[k++] = simplex[i];

        Eigen::Vector3d cand;
        bool valid = true;
        if (k == 1) {
            cand = pts[0];
        } else {
            Eigen::Matrix<double, 3, 3> basis;
            for (int i = 1; i < k; ++i) basis.col(i - 1) = pts[i] - pts[0];
            Eigen::MatrixXd m = basis.leftCols(k - 1);
            Eigen::MatrixXd gram = m.transpose() * m;
            Eigen::VectorXd rhs = -m.transpose() * pts[0];
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
            if (!lu.isInvertible()) continue;  // degenerate; covered by sub-subsets
            Eigen::VectorXd mu = lu.solve(rhs);
            double lam0 = 1.0 - mu.sum();
            if (lam0 < -1e-12) valid = false;
            for (int i = 0; i < mu.size(); ++i)
                if (mu[i] < -1e-12) valid = false;
            cand = pts[0] + m * mu;
        }
        if (!valid) continue;
        const double d2 = cand.squaredNorm();
        if (d2 < best) {
            best = d2;
            best_mask = mask;
            best_point = cand;
        }
    }

    std::vector<Eigen::Vector3d> kept;
    for (int i = 0; i < n; ++i)
        if (best_mask & (1 << i)) kept.push_back(simplex[i]);
    simplex = std::move(kept);
    closest = best_point;
    return std::sqrt(best);
}

inline Eigen::Vector3d support_point(const std::vector<Eigen::Vector3d>& pts,
                                     const Eigen::Vector3d& dir) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Vector3d arg = pts.front();
    for (const auto& p : pts) {
        const double d = p.dot(dir);
        if (d > best) {
            best = d;
            arg = p;
        }
    }
    return arg;
}

}  // namespace detail

// Euclidean distance between the convex hulls of two point sets (GJK).
inline double gjk_distance(const std::vector<Eigen::Vector3d>& a,
                           const std::vector<Eigen::Vector3d>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("gjk_distance: empty vertex set");

    constexpr int kMaxIterations = 128;
    constexpr double kImprovementTol = 1e-10;

    std::vector<Eigen::Vector3d> simplex;
    simplex.reserve(4);
    simplex.push_back(a.front() - b.front());

    Eigen::Vector3d v = simplex.front();
    double dist = v.norm();
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        dist = detail::reduce_simplex(simplex, v);
        if (dist < 1e-14) return 0.0;  // origin inside the difference hull
        const Eigen::Vector3d w =
            detail::support_point(a, -v) - detail::support_point(b, v);
        // Gilbert criterion: no support point can improve past the tolerance.
        if (v.squaredNorm() - v.dot(w) <= kImprovementTol * std::max(1.0, v.squaredNorm()))
            return dist;
        bool duplicate = false;
        for (const auto& p : simplex)
            if ((p - w).squaredNorm() < 1e-28) duplicate = true;
        if (duplicate) return dist;
        simplex.push_back(w);
    }
    return dist;  // iteration cap: current estimate is a valid upper envelope
}

inline double gjk_distance(const ConvexPolytope& a, const ConvexPolytope& b) {
    return gjk_distance(a.vertices, b.vertices);
}

inline double distance_to_sphere(const ConvexPolytope& a, const SphereObstacle& s) {
    if (!(s.radius > 0.0)) throw std::invalid_argument("distance_to_sphere: radius must be > 0");
    return std::max(0.0, gjk_distance(a.vertices, {s.center}) - s.radius);
}

// Distance from the convex hull of a point set to an obstacle, plus the
// unclamped sphere margin used as an optimizer-facing signed value.
inline std::pair<double, double> hull_obstacle_distance(const std::vector<Eigen::Vector3d>& pts,
                                                        const Obstacle& obs) {
    if (const auto* sphere = std::get_if<SphereObstacle>(&obs)) {
        const double margin = gjk_distance(pts, {sphere->center}) - sphere->radius;
        return {std::max(0.0, margin), margin};
    }
    const auto& poly = std::get<ConvexPolytope>(obs);
    const double d = gjk_distance(pts, poly.vertices);
    return {d, d};
}

inline double point_obstacle_distance(const Eigen::Vector3d& p, const Obstacle& obs) {
    if (const auto* sphere = std::get_if<SphereObstacle>(&obs))
        return std::max(0.0, (p - sphere->center).norm() - sphere->radius);
    return gjk_distance({p}, std::get<ConvexPolytope>(obs).vertices);
}

// Certified bounds on min_{s,t} d(r(s,t), obstacle) by best-first de Casteljau
// subdivision: hull distances give sound lower bounds (convex hull property),
// corner evaluations give upper bounds (endpoint property). Patches that cannot
// contain the minimum are frozen, which leaves the reported bounds identical to
// full expansion at the same depth.
inline DistanceBounds surface_min_distance(const VectorSurface& f, const Obstacle& obs,
                                           const ClearanceQuery& q) {
    if (q.max_depth < 0 || q.max_depth > 12)
        throw std::invalid_argument("surface_min_distance: max_depth must lie in [0, 12]");

    struct Patch {
        VectorSurface surf;
        int depth;
        double lower;
        double signed_lower;
    };
    struct Order {
        bool operator()(const Patch& a, const Patch& b) const { return a.lower > b.lower; }
    };

    auto patch_points = [](const VectorSurface& s) {
        std::vector<Eigen::Vector3d> pts;
        pts.reserve((s.degree_s() + 1) * (s.degree_t() + 1));
        for (int i = 0; i <= s.degree_s(); ++i)
            for (int j = 0; j <= s.degree_t(); ++j) pts.push_back(s.point(i, j));
        return pts;
    };

    double upper = std::numeric_limits<double>::infinity();
    auto corner_update = [&](const VectorSurface& s) {
        const int m = s.degree_s(), n = s.degree_t();
        for (const auto& c : {s.point(0, 0), s.point(m, 0), s.point(0, n), s.point(m, n)})
            upper = std::min(upper, point_obstacle_distance(c, obs));
    };

    auto make_patch = [&](VectorSurface s, int depth) {
        auto [lo, signed_lo] = hull_obstacle_distance(patch_points(s), obs);
        corner_update(s);
        return Patch{std::move(s), depth, lo, signed_lo};
    };

    std::priority_queue<Patch, std::vector<Patch>, Order> active;
    std::vector<std::pair<double, double>> frozen;  // (lower, signed_lower)
    active.push(make_patch(f, 0));

    constexpr int kExpansionBudget = 200000;
    int expansions = 0;
    while (!active.empty() && expansions < kExpansionBudget) {
        if (active.top().depth >= q.max_depth || active.top().lower > upper) {
            frozen.emplace_back(active.top().lower, active.top().signed_lower);
            active.pop();
            continue;
        }
        Patch p = active.top();
        active.pop();
        ++expansions;
        auto [sl, sr] = p.surf.split(SurfaceAxis::S, 0.5);
        for (auto* half : {&sl, &sr}) {
            auto [tl, tr] = half->split(SurfaceAxis::T, 0.5);
            active.push(make_patch(std::move(tl), p.depth + 1));
            active.push(make_patch(std::move(tr), p.depth + 1));
        }
    }

    DistanceBounds out;
    out.lower = std::numeric_limits<double>::infinity();
    out.signed_lower = std::numeric_limits<double>::infinity();
    while (!active.empty()) {
        frozen.emplace_back(active.top().lower, active.top().signed_lower);
        active.pop();
    }
    for (const auto& [lo, slo] : frozen) {
        out.lower = std::min(out.lower, lo);
        out.signed_lower = std::min(out.signed_lower, slo);
    }
    out.upper = upper;
    return out;
}

}  // namespace rodopt
