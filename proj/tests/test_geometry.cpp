#include <catch2/catch_amalgamated.hpp>

#include <rodopt/geometry.hpp>

#include <random>

using namespace rodopt;

namespace {

std::vector<Eigen::Vector3d> unit_cube(const Eigen::Vector3d& center = Eigen::Vector3d::Zero(),
                                       double half = 0.5) {
    std::vector<Eigen::Vector3d> v;
    for (int i = 0; i < 8; ++i)
        v.push_back(center + half * Eigen::Vector3d(i & 1 ? 1 : -1, i & 2 ? 1 : -1,
                                                    i & 4 ? 1 : -1));
    return v;
}

std::vector<Eigen::Vector3d> random_points(std::mt19937& rng, int count,
                                           const Eigen::Vector3d& center, double scale) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < count; ++i)
        pts.push_back(center + scale * Eigen::Vector3d(u(rng), u(rng), u(rng)));
    return pts;
}

// Exact minimum distance between convex hulls of small point sets: enumerate
// all sub-simplex pairs and solve the equality-constrained quadratic program.
double hull_distance_oracle(const std::vector<Eigen::Vector3d>& a,
                            const std::vector<Eigen::Vector3d>& b) {
    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    double best = std::numeric_limits<double>::infinity();
    for (int ma = 1; ma < (1 << na); ++ma) {
        for (int mb = 1; mb < (1 << nb); ++mb) {
            std::vector<Eigen::Vector3d> sa, sb;
            for (int i = 0; i < na; ++i)
                if (ma & (1 << i)) sa.push_back(a[i]);
            for (int j = 0; j < nb; ++j)
                if (mb & (1 << j)) sb.push_back(b[j]);
            const int p = static_cast<int>(sa.size()), q = static_cast<int>(sb.size());
            Eigen::MatrixXd m(3, p + q);
            for (int i = 0; i < p; ++i) m.col(i) = sa[i];
            for (int j = 0; j < q; ++j) m.col(p + j) = -sb[j];
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(p + q + 2, p + q + 2);
            kkt.topLeftCorner(p + q, p + q) = 2.0 * m.transpose() * m;
            for (int i = 0; i < p; ++i) kkt(p + q, i) = kkt(i, p + q) = 1.0;
            for (int j = 0; j < q; ++j) kkt(p + q + 1, p + j) = kkt(p + j, p + q + 1) = 1.0;
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p + q + 2);
            rhs[p + q] = 1.0;
            rhs[p + q + 1] = 1.0;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
            if (!lu.isInvertible()) continue;
            Eigen::VectorXd sol = lu.solve(rhs);
            bool feasible = true;
            for (int i = 0; i < p + q; ++i)
                if (sol[i] < -1e-10) feasible = false;
            if (!feasible) continue;
            best = std::min(best, (m * sol.head(p + q)).norm());
        }
    }
    return best;
}

VectorSurface random_position_surface(std::mt19937& rng, int m, int n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::array<Eigen::MatrixXd, 3> nets;
    for (auto& net : nets) {
        net.resize(m + 1, n + 1);
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= n; ++j) net(i, j) = u(rng);
    }
    return VectorSurface(std::move(nets), 0.24, 2.0);
}

double sampled_min_distance(const VectorSurface& f, const Obstacle& obs, int grid = 200) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double s = f.domain_s() * i / (grid - 1.0);
            const double t = f.domain_t() * j / (grid - 1.0);
            best = std::min(best, point_obstacle_distance(f.eval(s, t), obs));
        }
    return best;
}

}  // namespace

TEST_CASE("gjk distance on canonical shapes") {
    auto cube = unit_cube();
    CHECK(gjk_distance({Eigen::Vector3d(2, 0, 0)}, cube) == Catch::Approx(1.5).margin(1e-12));
    CHECK(gjk_distance(cube, cube) == 0.0);

    // separated cubes: axis-aligned gap and diagonal corner gap
    auto shifted = unit_cube(Eigen::Vector3d(2, 0, 0));
    CHECK(gjk_distance(cube, shifted) == Catch::Approx(1.0).margin(1e-9));
    auto diagonal = unit_cube(Eigen::Vector3d(2, 2, 0));
    CHECK(gjk_distance(cube, diagonal) == Catch::Approx(std::sqrt(2.0)).margin(1e-9));

    CHECK_THROWS_AS(gjk_distance({}, cube), std::invalid_argument);
}

TEST_CASE("gjk is symmetric and matches the exact oracle on random simplices") {
    auto rng = std::mt19937(7);
    std::uniform_real_distribution<double> sep(0.0, 3.0);
    for (int trial = 0; trial < 60; ++trial) {
        auto a = random_points(rng, 4, Eigen::Vector3d::Zero(), 1.0);
        auto b = random_points(rng, 4, Eigen::Vector3d(sep(rng), 0.3, -0.2), 1.0);
        const double d1 = gjk_distance(a, b);
        const double d2 = gjk_distance(b, a);
        CHECK(std::abs(d1 - d2) <= 1e-12);
        const double exact = hull_distance_oracle(a, b);
        CHECK(std::abs(d1 - exact) <= 1e-9);
    }
}

TEST_CASE("gjk matches the exact oracle on random hexahedral point sets") {
    auto rng = std::mt19937(13);
    std::uniform_real_distribution<double> sep(1.5, 4.0);
    for (int trial = 0; trial < 30; ++trial) {
        auto a = random_points(rng, 6, Eigen::Vector3d::Zero(), 1.0);
        auto b = random_points(rng, 6, Eigen::Vector3d(0.2, sep(rng), 0.1), 1.0);
        CHECK(std::abs(gjk_distance(a, b) - hull_distance_oracle(a, b)) <= 1e-9);
    }
}

TEST_CASE("gjk bracketed by dense vertex-pair and face sampling") {
    auto rng = std::mt19937(19);
    // Edge and triangle sweeps of the hull boundary, where closest points live.
    auto boundary_samples = [](const std::vector<Eigen::Vector3d>& pts) {
        std::vector<Eigen::Vector3d> out(pts);
        const int n = static_cast<int>(pts.size());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = 1; k < 10; ++k)
                    out.push_back(pts[i] + 0.1 * k * (pts[j] - pts[i]));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k)
                    for (int p = 1; p < 5; ++p)
                        for (int q = 1; p + q < 5; ++q)
                            out.push_back(pts[i] + 0.2 * p * (pts[j] - pts[i]) +
                                          0.2 * q * (pts[k] - pts[i]));
        return out;
    };
    for (int trial = 0; trial < 8; ++trial) {
        auto a = random_points(rng, 8, Eigen::Vector3d::Zero(), 1.0);
        auto b = random_points(rng, 8, Eigen::Vector3d(3.0, 0.5, 0.0), 1.0);
        const double d = gjk_distance(a, b);
        double sampled = std::numeric_limits<double>::infinity();
        for (const auto& pa : boundary_samples(a))
            for (const auto& pb : boundary_samples(b))
                sampled = std::min(sampled, (pa - pb).norm());
        CHECK(d <= sampled + 1e-9);  // samples lie inside the hulls, they cannot beat gjk
        CHECK(sampled - d <= 0.25);  // and boundary sampling comes close
    }
}

TEST_CASE("distance to sphere") {
    SphereObstacle s{Eigen::Vector3d(0.1, 0.0, 0.0), 0.03};
    ConvexPolytope containing{unit_cube()};
    CHECK(distance_to_sphere(containing, s) == 0.0);

    ConvexPolytope vertex{{Eigen::Vector3d(0.17, 0.0, 0.0)}};
    CHECK(distance_to_sphere(vertex, s) == Catch::Approx(0.04).margin(1e-12));

    CHECK_THROWS_AS(distance_to_sphere(vertex, SphereObstacle{Eigen::Vector3d::Zero(), 0.0}),
                    std::invalid_argument);

    auto rng = std::mt19937(23);
    for (int trial = 0; trial < 20; ++trial) {
        ConvexPolytope poly{random_points(rng, 6, Eigen::Vector3d(2.0, 0.0, 0.0), 0.8)};
        SphereObstacle sph{Eigen::Vector3d(-0.5, 0.3, 0.1), 0.25};
        const double exact =
            std::max(0.0, hull_distance_oracle(poly.vertices, {sph.center}) - sph.radius);
        CHECK(std::abs(distance_to_sphere(poly, sph) - exact) <= 1e-9);
    }
}

TEST_CASE("surface_min_distance: constant surface is exact at depth zero") {
    auto f = VectorSurface::constant(Eigen::Vector3d(0, 0, 1), 3, 3, 1.0, 1.0);
    Obstacle obs = SphereObstacle{Eigen::Vector3d::Zero(), 0.5};
    auto bounds = surface_min_distance(f, obs, {.epsilon = 0.0, .max_depth = 0});
    CHECK(bounds.lower == Catch::Approx(0.5).margin(1e-12));
    CHECK(bounds.upper == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("surface_min_distance: subdivision separates a pessimistic hull") {
    // Corner control points on the z=1 plane, center pulled to z=-1: the root
    // hull crosses the obstacle although the surface itself stays above z=0.5.
    std::array<Eigen::MatrixXd, 3> nets;
    for (auto& net : nets) net.resize(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            nets[0](i, j) = 0.5 * i;
            nets[1](i, j) = 0.5 * j;
            nets[2](i, j) = 1.0;
        }
    nets[2](1, 1) = -1.0;
    VectorSurface f(std::move(nets), 1.0, 1.0);
    Obstacle obs = SphereObstacle{Eigen::Vector3d(0.5, 0.5, -0.8), 0.1};

    auto root = surface_min_distance(f, obs, {.epsilon = 0.0, .max_depth = 0});
    CHECK(root.lower == 0.0);
    auto refined = surface_min_distance(f, obs, {.epsilon = 0.0, .max_depth = 4});
    CHECK(refined.lower > 0.0);
    CHECK(refined.lower <= sampled_min_distance(f, obs, 100) + 1e-12);
}

TEST_CASE("surface_min_distance soundness and monotonicity on random pairs") {
    auto rng = std::mt19937(31);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 12; ++trial) {
        auto f = random_position_surface(rng, 4, 4, 1.0);
        Obstacle obs;
        if (trial % 2 == 0)
            obs = SphereObstacle{Eigen::Vector3d(u(rng), u(rng), u(rng)), 0.4};
        else
            obs = ConvexPolytope{random_points(rng, 6, Eigen::Vector3d(u(rng), u(rng), u(rng)),
                                               0.5)};

        const double sampled = sampled_min_distance(f, obs, 100);
        double prev_lower = -1.0;
        double prev_upper = std::numeric_limits<double>::infinity();
        for (int depth = 0; depth <= 6; ++depth) {
            auto b = surface_min_distance(f, obs, {.epsilon = 0.0, .max_depth = depth});
            CHECK(b.lower <= b.upper + 1e-12);
            CHECK(b.lower <= sampled + 1e-9);
            CHECK(b.lower >= prev_lower - 1e-12);
            CHECK(b.upper <= prev_upper + 1e-12);
            prev_lower = b.lower;
            prev_upper = b.upper;
        }
    }
}
