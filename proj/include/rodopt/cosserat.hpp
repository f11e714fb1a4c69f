#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "rodopt/bernstein.hpp"

namespace rodopt {

// Euler pitch too close to +-pi/2; the rate map loses rank there.
struct GimbalLockError : std::runtime_error {
    GimbalLockError(double s_, double t_)
        : std::runtime_error("gimbal lock near pitch +-pi/2 at node (s=" + std::to_string(s_) +
                             ", t=" + std::to_string(t_) + ")"),
          s(s_),
          t(t_) {}
    double s;
    double t;
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
}

inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
    return Eigen::Vector3d(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)),
                           0.5 * (m(1, 0) - m(0, 1)));
}

// Intrinsic Z-Y-X (yaw-pitch-roll): R = Rz(psi) * Ry(theta) * Rx(phi).
inline Eigen::Matrix3d rotation_from_euler(double phi, double theta, double psi) {
    const double cf = std::cos(phi), sf = std::sin(phi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(psi), sp = std::sin(psi);
    Eigen::Matrix3d r;
    r << cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
         sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
         -st, ct * sf, ct * cf;
    return r;
}

constexpr double kGimbalCosTolerance = 1e-6;

// Body angular rate = E(phi, theta) * (dphi, dtheta, dpsi); the same map serves
// the s-derivative (yielding h) and the t-derivative (yielding omega).
inline Eigen::Matrix3d euler_rate_map(double phi, double theta) {
    if (std::abs(std::cos(theta)) <= kGimbalCosTolerance)
        throw GimbalLockError(0.0, 0.0);
    const double cf = std::cos(phi), sf = std::sin(phi);
    const double ct = std::cos(theta), st = std::sin(theta);
    Eigen::Matrix3d e;
    e << 1.0, 0.0, -st,
         0.0, cf, ct * sf,
         0.0, -sf, ct * cf;
    return e;
}

// Full decision state of the planning problem: position, attitude (Euler
// angle surfaces), strains, and velocities, all sharing degree and domain.
struct RodFields {
    VectorSurface r;
    ScalarSurface phi, theta, psi;
    VectorSurface l;      // translational strain
    VectorSurface h;      // bending strain
    VectorSurface v;      // body-frame translational velocity
    VectorSurface omega;  // body-frame angular velocity

    int degree_s() const { return r.degree_s(); }
    int degree_t() const { return r.degree_t(); }
    double domain_s() const { return r.domain_s(); }
    double domain_t() const { return r.domain_t(); }

    void require_consistent() const {
        auto same = [&](int m, int n, double sf, double tf) {
            return m == r.degree_s() && n == r.degree_t() &&
                   std::abs(sf - r.domain_s()) <= 1e-12 * r.domain_s() &&
                   std::abs(tf - r.domain_t()) <= 1e-12 * r.domain_t();
        };
        const bool ok =
            same(phi.degree_s(), phi.degree_t(), phi.domain_s(), phi.domain_t()) &&
            same(theta.degree_s(), theta.degree_t(), theta.domain_s(), theta.domain_t()) &&
            same(psi.degree_s(), psi.degree_t(), psi.domain_s(), psi.domain_t()) &&
            same(l.degree_s(), l.degree_t(), l.domain_s(), l.domain_t()) &&
            same(h.degree_s(), h.degree_t(), h.domain_s(), h.domain_t()) &&
            same(v.degree_s(), v.degree_t(), v.domain_s(), v.domain_t()) &&
            same(omega.degree_s(), omega.degree_t(), omega.domain_s(), omega.domain_t());
        if (!ok) throw std::invalid_argument("RodFields: surfaces disagree in degree or domain");
    }

    static RodFields zero(int m, int n, double s_f, double t_f) {
        return RodFields{VectorSurface::zero(m, n, s_f, t_f),
                         ScalarSurface::zero(m, n, s_f, t_f),
                         ScalarSurface::zero(m, n, s_f, t_f),
                         ScalarSurface::zero(m, n, s_f, t_f),
                         VectorSurface::zero(m, n, s_f, t_f),
                         VectorSurface::zero(m, n, s_f, t_f),
                         VectorSurface::zero(m, n, s_f, t_f),
                         VectorSurface::zero(m, n, s_f, t_f)};
    }
};

struct CollocationGrid {
    Eigen::VectorXd s_nodes;
    Eigen::VectorXd t_nodes;

    static CollocationGrid uniform(int n_s, int n_t, double s_f, double t_f) {
        if (n_s < 2 || n_t < 2)
            throw std::invalid_argument("CollocationGrid: need at least two nodes per axis");
        CollocationGrid g;
        g.s_nodes = Eigen::VectorXd::LinSpaced(n_s, 0.0, s_f);
        g.t_nodes = Eigen::VectorXd::LinSpaced(n_t, 0.0, t_f);
        return g;
    }
};

// Residuals of the kinematic PDE system at the grid nodes, stacked per node as
// [r_s - R l (3), r_t - R v (3), E d(angles)/ds - h (3), E d(angles)/dt - omega (3)],
// node index running s-major. Length is 12 * N_s * N_t.
inline Eigen::VectorXd kinematic_residuals(const RodFields& fields, const CollocationGrid& grid) {
    fields.require_consistent();
    const int n_s = static_cast<int>(grid.s_nodes.size());
    const int n_t = static_cast<int>(grid.t_nodes.size());
    if (n_s < fields.degree_s() + 1 || n_t < fields.degree_t() + 1)
        throw std::invalid_argument("kinematic_residuals: grid sparser than the surface degree");

    const VectorSurface r_s = fields.r.diff_s();
    const VectorSurface r_t = fields.r.diff_t();
    const ScalarSurface phi_s = fields.phi.diff_s(), phi_t = fields.phi.diff_t();
    const ScalarSurface theta_s = fields.theta.diff_s(), theta_t = fields.theta.diff_t();
    const ScalarSurface psi_s = fields.psi.diff_s(), psi_t = fields.psi.diff_t();

    Eigen::VectorXd res(12 * n_s * n_t);
    for (int i = 0; i < n_s; ++i) {
        for (int j = 0; j < n_t; ++j) {
            const double s = grid.s_nodes[i];
            const double t = grid.t_nodes[j];
            const double phi = fields.phi.eval(s, t);
            const double theta = fields.theta.eval(s, t);
            const double psi = fields.psi.eval(s, t);
            if (std::abs(std::cos(theta)) <= kGimbalCosTolerance) throw GimbalLockError(s, t);
            const Eigen::Matrix3d rot = rotation_from_euler(phi, theta, psi);
            const Eigen::Matrix3d e = euler_rate_map(phi, theta);
            const Eigen::Vector3d angles_s(phi_s.eval(s, t), theta_s.eval(s, t),
                                           psi_s.eval(s, t));
            const Eigen::Vector3d angles_t(phi_t.eval(s, t), theta_t.eval(s, t),
                                           psi_t.eval(s, t));
            const int base = 12 * (i * n_t + j);
            res.segment<3>(base + 0) = r_s.eval(s, t) - rot * fields.l.eval(s, t);
            res.segment<3>(base + 3) = r_t.eval(s, t) - rot * fields.v.eval(s, t);
            res.segment<3>(base + 6) = e * angles_s - fields.h.eval(s, t);
            res.segment<3>(base + 9) = e * angles_t - fields.omega.eval(s, t);
        }
    }
    return res;
}

}  // namespace rodopt
