#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rodopt/cosserat.hpp"
#include "rodopt/geometry.hpp"

namespace rodopt {

struct LineFormation {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

struct EllipseFormation {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double semi_major = 1.0;
    double semi_minor = 1.0;
    Eigen::Vector3d axis1 = Eigen::Vector3d::UnitX();
    Eigen::Vector3d axis2 = Eigen::Vector3d::UnitY();
    double param_begin = 0.0;
    double param_end = M_PI / 2;
    bool arclength = true;  // map s to the curve by arclength instead of raw parameter
};

struct HelixFormation {
    Eigen::Vector3d base = Eigen::Vector3d::Zero();
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    double radius = 1.0;
    double pitch = 1.0;  // axial advance per turn
    double phase = 0.0;
};

struct SampledFormation {
    std::vector<double> s_values;            // ascending, spanning [0, s_f]
    std::vector<Eigen::Vector3d> points;     // matching positions
};

using Formation = std::variant<LineFormation, EllipseFormation, HelixFormation, SampledFormation>;

// Pose and compatible strains of a formation curve at one arclength station.
struct FormationPose {
    Eigen::Vector3d position;
    Eigen::Vector3d rpy;       // (phi, theta, psi), Z-Y-X intrinsic
    Eigen::Vector3d strain_l;  // R^T dr/ds
    Eigen::Vector3d strain_h;  // vee(R^T dR/ds)
};

namespace detail {

// Curve position and derivative with respect to s for each formation kind.
class FormationCurve {
public:
    FormationCurve(const Formation& f, double s_f) : s_f_(s_f) {
        if (const auto* e = std::get_if<EllipseFormation>(&f); e && e->arclength) {
            // cumulative arclength table over the raw parameter for inversion
            const int kTable = 4096;
            cum_.resize(kTable + 1);
            params_.resize(kTable + 1);
            double acc = 0.0;
            Eigen::Vector3d prev = ellipse_point(*e, e->param_begin);
            cum_[0] = 0.0;
            params_[0] = e->param_begin;
            for (int k = 1; k <= kTable; ++k) {
                const double th =
                    e->param_begin + (e->param_end - e->param_begin) * k / double(kTable);
                const Eigen::Vector3d p = ellipse_point(*e, th);
                acc += (p - prev).norm();
                cum_[k] = acc;
                params_[k] = th;
                prev = p;
            }
        }
        formation_ = f;
    }

    Eigen::Vector3d position(double s) const {
        return std::visit([&](const auto& f) { return position_impl(f, s); }, formation_);
    }

    Eigen::Vector3d derivative(double s) const {
        const double step = 1e-6 * s_f_;
        const double lo = std::max(0.0, s - step);
        const double hi = std::min(s_f_, s + step);
        return (position(hi) - position(lo)) / (hi - lo);
    }

private:
    static Eigen::Vector3d ellipse_point(const EllipseFormation& e, double th) {
        return e.center + e.semi_major * std::cos(th) * e.axis1.normalized() +
               e.semi_minor * std::sin(th) * e.axis2.normalized();
    }

    Eigen::Vector3d position_impl(const LineFormation& f, double s) const {
        return f.origin + s * f.direction;
    }

    Eigen::Vector3d position_impl(const EllipseFormation& f, double s) const {
        double th;
        if (f.arclength) {
            const double target = cum_.back() * s / s_f_;
            const auto it = std::lower_bound(cum_.begin(), cum_.end(), target);
            const int hi = std::min<int>(static_cast<int>(it - cum_.begin()),
                                         static_cast<int>(cum_.size()) - 1);
            if (hi == 0) {
                th = params_.front();
            } else {
                const double seg = cum_[hi] - cum_[hi - 1];
                const double w = seg > 0 ? (target - cum_[hi - 1]) / seg : 0.0;
                th = params_[hi - 1] + w * (params_[hi] - params_[hi - 1]);
            }
        } else {
            th = f.param_begin + (f.param_end - f.param_begin) * s / s_f_;
        }
        return ellipse_point(f, th);
    }

    Eigen::Vector3d position_impl(const HelixFormation& f, double s) const {
        // traversed by arclength: the helix spans exactly the rod length
        const double c = f.pitch / (2.0 * M_PI);
        const double speed = std::sqrt(f.radius * f.radius + c * c);
        const double th = f.phase + s / speed;
        const Eigen::Vector3d az = f.axis.normalized();
        const Eigen::Vector3d ax =
            (std::abs(az.z()) < 0.9 ? az.cross(Eigen::Vector3d::UnitZ()) : az.cross(Eigen::Vector3d::UnitX()))
                .normalized();
        const Eigen::Vector3d ay = az.cross(ax);
        return f.base + f.radius * std::cos(th) * ax + f.radius * std::sin(th) * ay +
               c * (th - f.phase) * az;
    }

    Eigen::Vector3d position_impl(const SampledFormation& f, double s) const {
        if (f.s_values.size() < 2) return f.points.front();
        auto it = std::lower_bound(f.s_values.begin(), f.s_values.end(), s);
        int hi = static_cast<int>(it - f.s_values.begin());
        hi = std::min(std::max(hi, 1), static_cast<int>(f.s_values.size()) - 1);
        const double seg = f.s_values[hi] - f.s_values[hi - 1];
        const double w = seg > 0 ? (s - f.s_values[hi - 1]) / seg : 0.0;
        return f.points[hi - 1] + w * (f.points[hi] - f.points[hi - 1]);
    }

    Formation formation_;
    double s_f_;
    std::vector<double> cum_;
    std::vector<double> params_;
};

// Rotation with body-z along the tangent and, when the tangent is not
// vertical, a horizontal body-x; keeps the pitch angle away from +-pi/2.
inline Eigen::Matrix3d tangent_frame(const Eigen::Vector3d& tangent) {
    const Eigen::Vector3d bz = tangent.normalized();
    Eigen::Vector3d bx = Eigen::Vector3d::UnitZ().cross(bz);
    if (bx.norm() < 1e-8) {
        bx = Eigen::Vector3d::UnitX() - bz * bz.x();
        if (bz.z() < 0.0) bx = -bx;
    }
    bx.normalize();
    const Eigen::Vector3d by = bz.cross(bx);
    Eigen::Matrix3d r;
    r.col(0) = bx;
    r.col(1) = by;
    r.col(2) = bz;
    return r;
}

inline Eigen::Vector3d euler_from_rotation(const Eigen::Matrix3d& r) {
    const double theta = -std::asin(std::min(1.0, std::max(-1.0, r(2, 0))));
    const double psi = std::atan2(r(1, 0), r(0, 0));
    const double phi = std::atan2(r(2, 1), r(2, 2));
    return Eigen::Vector3d(phi, theta, psi);
}

inline double unwrap_near(double angle, double reference) {
    while (angle - reference > M_PI) angle -= 2.0 * M_PI;
    while (angle - reference < -M_PI) angle += 2.0 * M_PI;
    return angle;
}

}  // namespace detail

// Attitude assigned to agents along a formation curve: a fixed identity
// attitude (heading-neutral formations) or a frame tracking the curve tangent.
enum class FormationAttitude { Zero, Tangent };

// Poses along a formation at the requested stations, with Euler angles
// unwrapped for continuity in s.
inline std::vector<FormationPose> sample_formation(const Formation& formation,
                                                   FormationAttitude attitude,
                                                   const Eigen::VectorXd& s_nodes, double s_f) {
    detail::FormationCurve curve(formation, s_f);
    std::vector<FormationPose> out(s_nodes.size());
    Eigen::Vector3d prev_rpy = Eigen::Vector3d::Zero();
    const double fd = 1e-5 * s_f;
    for (int k = 0; k < s_nodes.size(); ++k) {
        const double s = s_nodes[k];
        const Eigen::Vector3d deriv = curve.derivative(s);
        out[k].position = curve.position(s);
        if (attitude == FormationAttitude::Zero) {
            out[k].rpy = Eigen::Vector3d::Zero();
            out[k].strain_l = deriv;
            out[k].strain_h = Eigen::Vector3d::Zero();
            continue;
        }
        const Eigen::Matrix3d rot = detail::tangent_frame(deriv);
        Eigen::Vector3d rpy = detail::euler_from_rotation(rot);
        if (k > 0) {
            rpy[0] = detail::unwrap_near(rpy[0], prev_rpy[0]);
            rpy[2] = detail::unwrap_near(rpy[2], prev_rpy[2]);
        }
        prev_rpy = rpy;

        const double lo = std::max(0.0, s - fd), hi = std::min(s_f, s + fd);
        const Eigen::Matrix3d r_lo = detail::tangent_frame(curve.derivative(lo));
        const Eigen::Matrix3d r_hi = detail::tangent_frame(curve.derivative(hi));

        out[k].rpy = rpy;
        out[k].strain_l = rot.transpose() * deriv;
        out[k].strain_h = vee(rot.transpose() * ((r_hi - r_lo) / (hi - lo)));
    }
    return out;
}

struct FeasibilityBounds {
    double nu_min = 0.7;
    double nu_max = 2.25;
    double mu_max = 1.55;
    double v_max = 0.35;
    double omega_max = 2.5;
};

struct CostConfig {
    enum class Kind { LeaderTracking, RunningEffort };
    Kind kind = Kind::LeaderTracking;
    double rho_tf = 0.0;  // optional time penalty; Eq. (15) carries none
};

struct Scenario {
    std::string name = "scenario";
    int m = 6;
    int n = 6;
    double s_f = 0.24;
    double t_min = 0.5;
    double t_max = 8.0;
    double t_init = 3.0;
    FeasibilityBounds bounds;
    Formation initial_formation = LineFormation{};
    Formation final_formation = LineFormation{};
    FormationAttitude initial_attitude = FormationAttitude::Zero;
    FormationAttitude final_attitude = FormationAttitude::Zero;
    std::vector<Obstacle> obstacles;
    double epsilon = 0.005;
    CostConfig cost;
    int n_agents = 10;
    int n_s = 0;             // collocation nodes in s; 0 -> 2m+1
    int n_t = 0;             // collocation nodes in t; 0 -> 2n+1
    int obstacle_depth = 2;  // subdivision depth of the optimizer-side clearance bound
    bool enforce_final_pose = true;
    double theta_box = 1.4;  // control-point bound on pitch, keeps E regular

    int nodes_s() const { return n_s > 0 ? n_s : 2 * m + 1; }
    int nodes_t() const { return n_t > 0 ? n_t : 2 * n + 1; }

    void validate() const {
        std::vector<std::string> faults;
        if (m < 1 || n < 1) faults.push_back("orders must be at least 1");
        if (!(s_f > 0)) faults.push_back("s_f must be positive");
        if (!(t_min > 0) || t_max < t_min) faults.push_back("time window invalid");
        if (t_init < t_min || t_init > t_max) faults.push_back("t_init outside window");
        if (!(bounds.nu_min < bounds.nu_max)) faults.push_back("nu_min must be below nu_max");
        if (!(bounds.nu_min > 0) || !(bounds.mu_max > 0) || !(bounds.v_max > 0) ||
            !(bounds.omega_max > 0))
            faults.push_back("feasibility bounds must be positive");
        if (epsilon < 0) faults.push_back("epsilon must be nonnegative");
        if (n_agents < 1) faults.push_back("agent count must be at least 1");
        if (nodes_s() < m + 1 || nodes_t() < n + 1)
            faults.push_back("collocation grid sparser than the surface degree");
        if (obstacle_depth < 0 || obstacle_depth > 12)
            faults.push_back("obstacle_depth outside [0, 12]");
        if (!(theta_box > 0) || theta_box >= M_PI / 2 - 1e-3)
            faults.push_back("theta_box must lie in (0, pi/2)");
        for (const auto& obs : obstacles) {
            if (const auto* s = std::get_if<SphereObstacle>(&obs)) {
                if (!(s->radius > 0)) faults.push_back("sphere obstacle radius must be positive");
            } else if (std::get<ConvexPolytope>(obs).vertices.empty()) {
                faults.push_back("polytope obstacle has no vertices");
            }
        }
        if (!faults.empty()) {
            std::string msg = "invalid scenario:";
            for (const auto& f : faults) msg += "\n  - " + f;
            throw std::invalid_argument(msg);
        }
    }
};

}  // namespace rodopt
