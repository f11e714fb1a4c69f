#include <catch2/catch_amalgamated.hpp>

#include <rodopt/cosserat.hpp>

#include <random>

using namespace rodopt;

namespace {

ScalarSurface bilinear_surface(double c00, double cs, double ct, double s_f, double t_f,
                               int m, int n) {
    // c00 + cs*s + ct*t as an (m,n) surface
    Eigen::MatrixXd net(2, 2);
    net << c00, c00 + ct * t_f, c00 + cs * s_f, c00 + cs * s_f + ct * t_f;
    return ScalarSurface({net}, s_f, t_f).degree_elevated(m, n);
}

VectorSurface vector_from_components(const ScalarSurface& x, const ScalarSurface& y,
                                     const ScalarSurface& z) {
    return VectorSurface({x.net(), y.net(), z.net()}, x.domain_s(), x.domain_t());
}

}  // namespace

TEST_CASE("skew operator") {
    CHECK(skew(Eigen::Vector3d::Zero()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((skew(Eigen::Vector3d::UnitZ()) * Eigen::Vector3d::UnitX() -
           Eigen::Vector3d::UnitY())
              .norm() <= 1e-15);

    auto rng = std::mt19937(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        Eigen::Vector3d w(u(rng), u(rng), u(rng)), x(u(rng), u(rng), u(rng));
        CHECK((skew(w) + skew(w).transpose()).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((skew(w) * x - w.cross(x)).norm() <= 1e-14);
    }
}

TEST_CASE("rotation from euler angles") {
    CHECK((rotation_from_euler(0, 0, 0) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() ==
          0.0);
    // quarter pitch sends e1 to -e3 under Z-Y-X
    Eigen::Vector3d img = rotation_from_euler(0, M_PI / 2, 0) * Eigen::Vector3d::UnitX();
    CHECK((img - (-Eigen::Vector3d::UnitZ())).norm() <= 1e-15);

    auto rng = std::mt19937(7);
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    for (int k = 0; k < 50; ++k) {
        Eigen::Matrix3d r = rotation_from_euler(u(rng), u(rng), u(rng));
        CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(std::abs(r.determinant() - 1.0) <= 1e-12);
    }
}

TEST_CASE("euler rate map: pure pitch, pure yaw, finite-difference oracle") {
    {
        Eigen::Vector3d rate = euler_rate_map(0.0, 0.3) * Eigen::Vector3d(0.0, 1.7, 0.0);
        CHECK((rate - 1.7 * Eigen::Vector3d::UnitY()).norm() <= 1e-14);
    }
    {
        Eigen::Vector3d rate = euler_rate_map(0.0, 0.0) * Eigen::Vector3d(0.0, 0.0, -0.9);
        CHECK((rate - (-0.9) * Eigen::Vector3d::UnitZ()).norm() <= 1e-14);
    }
    CHECK_THROWS_AS(euler_rate_map(0.2, M_PI / 2), GimbalLockError);

    auto rng = std::mt19937(11);
    std::uniform_real_distribution<double> ang(-1.2, 1.2), rt(-2.0, 2.0);
    const double eps = 1e-6;
    for (int k = 0; k < 50; ++k) {
        const Eigen::Vector3d a(ang(rng), ang(rng), ang(rng));
        const Eigen::Vector3d da(rt(rng), rt(rng), rt(rng));
        const Eigen::Matrix3d r0 = rotation_from_euler(a[0], a[1], a[2]);
        const Eigen::Matrix3d rp =
            rotation_from_euler(a[0] + eps * da[0], a[1] + eps * da[1], a[2] + eps * da[2]);
        const Eigen::Matrix3d rm =
            rotation_from_euler(a[0] - eps * da[0], a[1] - eps * da[1], a[2] - eps * da[2]);
        const Eigen::Vector3d body_rate = vee(r0.transpose() * ((rp - rm) / (2 * eps)));
        const Eigen::Vector3d mapped = euler_rate_map(a[0], a[1]) * da;
        CHECK((mapped - body_rate).norm() <= 1e-6);
    }
}

TEST_CASE("residuals vanish on a straight static rod") {
    const int m = 4, n = 4;
    const double s_f = 0.24, t_f = 2.0;
    RodFields f = RodFields::zero(m, n, s_f, t_f);
    f.r = vector_from_components(ScalarSurface::zero(m, n, s_f, t_f),
                                 ScalarSurface::zero(m, n, s_f, t_f),
                                 bilinear_surface(0.0, 1.0, 0.0, s_f, t_f, m, n));
    f.l = VectorSurface::constant(Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);

    auto grid = CollocationGrid::uniform(2 * m + 1, 2 * n + 1, s_f, t_f);
    Eigen::VectorXd res = kinematic_residuals(f, grid);
    CHECK(res.size() == 12 * (2 * m + 1) * (2 * n + 1));
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("residuals vanish on a rigid translation with constant attitude") {
    const int m = 3, n = 3;
    const double s_f = 0.24, t_f = 1.5, v0 = 0.25;
    const double phi0 = 0.4, theta0 = -0.3, psi0 = 1.1;
    const Eigen::Matrix3d r0 = rotation_from_euler(phi0, theta0, psi0);

    RodFields f = RodFields::zero(m, n, s_f, t_f);
    // r(s,t) = R0 * (s e3) + t * v0 * e1
    const Eigen::Vector3d dir = r0 * Eigen::Vector3d::UnitZ();
    f.r = vector_from_components(
        bilinear_surface(0.0, dir.x(), v0, s_f, t_f, m, n),
        bilinear_surface(0.0, dir.y(), 0.0, s_f, t_f, m, n),
        bilinear_surface(0.0, dir.z(), 0.0, s_f, t_f, m, n));
    f.phi = ScalarSurface::constant(phi0, m, n, s_f, t_f);
    f.theta = ScalarSurface::constant(theta0, m, n, s_f, t_f);
    f.psi = ScalarSurface::constant(psi0, m, n, s_f, t_f);
    f.l = VectorSurface::constant(Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);
    f.v = VectorSurface::constant(r0.transpose() * (v0 * Eigen::Vector3d::UnitX()), m, n, s_f,
                                  t_f);

    auto grid = CollocationGrid::uniform(2 * m + 1, 2 * n + 1, s_f, t_f);
    CHECK(kinematic_residuals(f, grid).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("residuals vanish on a constant-twist rod") {
    const int m = 5, n = 5;
    const double s_f = 0.24, t_f = 2.0, twist_s = 2.0, twist_t = 0.7;
    RodFields f = RodFields::zero(m, n, s_f, t_f);
    f.r = vector_from_components(ScalarSurface::zero(m, n, s_f, t_f),
                                 ScalarSurface::zero(m, n, s_f, t_f),
                                 bilinear_surface(0.0, 1.0, 0.0, s_f, t_f, m, n));
    f.psi = bilinear_surface(0.1, twist_s, twist_t, s_f, t_f, m, n);
    f.l = VectorSurface::constant(Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);
    f.h = VectorSurface::constant(twist_s * Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);
    f.omega = VectorSurface::constant(twist_t * Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);

    auto grid = CollocationGrid::uniform(2 * m + 1, 2 * n + 1, s_f, t_f);
    CHECK(kinematic_residuals(f, grid).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("perturbing a strain control point moves only the strain equations") {
    const int m = 3, n = 3;
    const double s_f = 1.0, t_f = 1.0, delta = 1e-4;
    RodFields f = RodFields::zero(m, n, s_f, t_f);
    f.r = vector_from_components(ScalarSurface::zero(m, n, s_f, t_f),
                                 ScalarSurface::zero(m, n, s_f, t_f),
                                 bilinear_surface(0.0, 1.0, 0.0, s_f, t_f, m, n));
    f.l = VectorSurface::constant(Eigen::Vector3d::UnitZ(), m, n, s_f, t_f);

    auto grid = CollocationGrid::uniform(m + 2, n + 2, s_f, t_f);
    Eigen::VectorXd base = kinematic_residuals(f, grid);

    RodFields g = f;
    g.l.net(0)(1, 2) += delta;
    Eigen::VectorXd perturbed = kinematic_residuals(g, grid);
    Eigen::VectorXd diff = (perturbed - base).cwiseAbs();
    double max_strain_block = 0.0, max_other = 0.0;
    for (int k = 0; k < diff.size(); ++k) {
        if (k % 12 < 3)
            max_strain_block = std::max(max_strain_block, diff[k]);
        else
            max_other = std::max(max_other, diff[k]);
    }
    CHECK(max_strain_block > 0.0);
    CHECK(max_strain_block <= 2.0 * delta);
    CHECK(max_other == 0.0);
}

TEST_CASE("residuals propagate gimbal lock with the offending node") {
    const int m = 2, n = 2;
    RodFields f = RodFields::zero(m, n, 1.0, 1.0);
    f.r = vector_from_components(ScalarSurface::zero(m, n, 1.0, 1.0),
                                 ScalarSurface::zero(m, n, 1.0, 1.0),
                                 bilinear_surface(0.0, 1.0, 0.0, 1.0, 1.0, m, n));
    f.l = VectorSurface::constant(Eigen::Vector3d::UnitZ(), m, n, 1.0, 1.0);
    f.theta = ScalarSurface::constant(M_PI / 2, m, n, 1.0, 1.0);
    auto grid = CollocationGrid::uniform(m + 1, n + 1, 1.0, 1.0);
    CHECK_THROWS_AS(kinematic_residuals(f, grid), GimbalLockError);
}

TEST_CASE("shape validation") {
    RodFields f = RodFields::zero(3, 3, 1.0, 1.0);
    f.v = VectorSurface::zero(4, 3, 1.0, 1.0);
    auto grid = CollocationGrid::uniform(7, 7, 1.0, 1.0);
    CHECK_THROWS_AS(kinematic_residuals(f, grid), std::invalid_argument);

    RodFields g = RodFields::zero(3, 3, 1.0, 1.0);
    auto sparse = CollocationGrid::uniform(3, 7, 1.0, 1.0);
    CHECK_THROWS_AS(kinematic_residuals(g, sparse), std::invalid_argument);
}
