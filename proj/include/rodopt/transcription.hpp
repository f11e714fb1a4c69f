#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rodopt/cosserat.hpp"
#include "rodopt/geometry.hpp"
#include "rodopt/nlp.hpp"
#include "rodopt/scenario.hpp"

namespace rodopt {

// Decision-vector layout: 18 control nets flattened column-major (s-index
// fastest) in the order r(x,y,z), phi, theta, psi, l(x,y,z), h(x,y,z),
// v(x,y,z), omega(x,y,z), followed by the single t_f slot.
struct VariableLayout {
    int m = 6;
    int n = 6;
    double s_f = 0.24;

    static constexpr int kFieldCount = 18;
    int net_size() const { return (m + 1) * (n + 1); }
    int size() const { return kFieldCount * net_size() + 1; }
    int field_offset(int field) const { return field * net_size(); }
    int t_f_index() const { return kFieldCount * net_size(); }
};

namespace detail {

inline void flatten_net(const Eigen::MatrixXd& net, Eigen::VectorXd& x, int offset) {
    Eigen::Map<Eigen::VectorXd>(x.data() + offset, net.size()) =
        Eigen::Map<const Eigen::VectorXd>(net.data(), net.size());
}

inline Eigen::MatrixXd unflatten_net(const Eigen::VectorXd& x, int offset, int rows, int cols) {
    return Eigen::Map<const Eigen::MatrixXd>(x.data() + offset, rows, cols);
}

}  // namespace detail

inline Eigen::VectorXd pack(const RodFields& fields, double t_f) {
    fields.require_consistent();
    VariableLayout lay{fields.degree_s(), fields.degree_t(), fields.domain_s()};
    Eigen::VectorXd x(lay.size());
    const Eigen::MatrixXd* nets[VariableLayout::kFieldCount] = {
        &fields.r.net(0),     &fields.r.net(1),     &fields.r.net(2),   &fields.phi.net(),
        &fields.theta.net(),  &fields.psi.net(),    &fields.l.net(0),   &fields.l.net(1),
        &fields.l.net(2),     &fields.h.net(0),     &fields.h.net(1),   &fields.h.net(2),
        &fields.v.net(0),     &fields.v.net(1),     &fields.v.net(2),   &fields.omega.net(0),
        &fields.omega.net(1), &fields.omega.net(2)};
    for (int k = 0; k < VariableLayout::kFieldCount; ++k)
        detail::flatten_net(*nets[k], x, lay.field_offset(k));
    x[lay.t_f_index()] = t_f;
    return x;
}

inline std::pair<RodFields, double> unpack(const Eigen::VectorXd& x, int m, int n, double s_f) {
    VariableLayout lay{m, n, s_f};
    if (x.size() != lay.size())
        throw std::invalid_argument("unpack: decision vector length mismatch");
    const double t_f = x[lay.t_f_index()];
    if (!(t_f > 0.0)) throw std::domain_error("unpack: t_f must be positive");
    auto net = [&](int k) { return detail::unflatten_net(x, lay.field_offset(k), m + 1, n + 1); };
    RodFields f{VectorSurface({net(0), net(1), net(2)}, s_f, t_f),
                ScalarSurface({net(3)}, s_f, t_f),
                ScalarSurface({net(4)}, s_f, t_f),
                ScalarSurface({net(5)}, s_f, t_f),
                VectorSurface({net(6), net(7), net(8)}, s_f, t_f),
                VectorSurface({net(9), net(10), net(11)}, s_f, t_f),
                VectorSurface({net(12), net(13), net(14)}, s_f, t_f),
                VectorSurface({net(15), net(16), net(17)}, s_f, t_f)};
    return {std::move(f), t_f};
}

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

// Degree-m Bernstein coefficients of each pinned edge field; absent entries
// are unconstrained.
struct EdgeTargets {
    std::optional<std::array<Eigen::VectorXd, 3>> r;
    std::optional<std::array<Eigen::VectorXd, 3>> angles;  // phi, theta, psi
    std::optional<std::array<Eigen::VectorXd, 3>> l;
    std::optional<std::array<Eigen::VectorXd, 3>> h;
    std::optional<std::array<Eigen::VectorXd, 3>> v;
    std::optional<std::array<Eigen::VectorXd, 3>> omega;

    int rows(int m) const {
        int blocks = 0;
        for (const auto* t : {&r, &angles, &l, &h, &v, &omega})
            if (t->has_value()) blocks += 3;
        return blocks * (m + 1);
    }
};

struct BoundaryConditions {
    EdgeTargets initial;     // t = 0 edge, full state
    EdgeTargets final_edge;  // t = t_f edge, empty when unconstrained
};

namespace detail {

// Coefficients of the degree-m Bernstein curve interpolating values at m+1
// uniform edge nodes; exact for polynomial targets of degree <= m.
class EdgeInterpolator {
public:
    EdgeInterpolator(int m, double s_f) : m_(m) {
        nodes_ = Eigen::VectorXd::LinSpaced(m + 1, 0.0, s_f);
        Eigen::MatrixXd basis(m + 1, m + 1);
        for (int k = 0; k <= m; ++k)
            for (int a = 0; a <= m; ++a) basis(k, a) = bernstein_basis(a, m, nodes_[k], s_f);
        lu_.compute(basis);
    }

    const Eigen::VectorXd& nodes() const { return nodes_; }

    Eigen::VectorXd coefficients(const Eigen::VectorXd& values) const {
        return lu_.solve(values);
    }

private:
    int m_;
    Eigen::VectorXd nodes_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

inline std::array<Eigen::VectorXd, 3> component_coeffs(
    const EdgeInterpolator& interp, const std::vector<FormationPose>& poses,
    const Eigen::Vector3d FormationPose::*member) {
    const int count = static_cast<int>(poses.size());
    std::array<Eigen::VectorXd, 3> out;
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd values(count);
        for (int k = 0; k < count; ++k) values[k] = (poses[k].*member)[c];
        out[c] = interp.coefficients(values);
    }
    return out;
}

}  // namespace detail

inline BoundaryConditions build_boundary_conditions(const Scenario& sc) {
    detail::EdgeInterpolator interp(sc.m, sc.s_f);
    BoundaryConditions bc;

    const auto initial =
        sample_formation(sc.initial_formation, sc.initial_attitude, interp.nodes(), sc.s_f);
    bc.initial.r = detail::component_coeffs(interp, initial, &FormationPose::position);
    bc.initial.angles = detail::component_coeffs(interp, initial, &FormationPose::rpy);
    bc.initial.l = detail::component_coeffs(interp, initial, &FormationPose::strain_l);
    bc.initial.h = detail::component_coeffs(interp, initial, &FormationPose::strain_h);
    std::array<Eigen::VectorXd, 3> zeros;
    for (auto& z : zeros) z = Eigen::VectorXd::Zero(sc.m + 1);
    bc.initial.v = zeros;
    bc.initial.omega = zeros;

    if (sc.enforce_final_pose) {
        const auto final_poses =
            sample_formation(sc.final_formation, sc.final_attitude, interp.nodes(), sc.s_f);
        bc.final_edge.r = detail::component_coeffs(interp, final_poses, &FormationPose::position);
        bc.final_edge.angles = detail::component_coeffs(interp, final_poses, &FormationPose::rpy);
    }
    return bc;
}

// Equality rows pinning edge control points to the target coefficients, in the
// order initial [r, angles, l, h, v, omega] then final [r, angles].
inline Eigen::VectorXd build_boundary_constraints(const RodFields& fields,
                                                  const BoundaryConditions& bc) {
    fields.require_consistent();
    const int m = fields.degree_s();
    const int n = fields.degree_t();
    Eigen::VectorXd out(bc.initial.rows(m) + bc.final_edge.rows(m));
    int off = 0;

    auto emit = [&](const std::optional<std::array<Eigen::VectorXd, 3>>& target,
                    const Eigen::MatrixXd* nets[3], int col) {
        if (!target) return;
        for (int c = 0; c < 3; ++c) {
            out.segment(off, m + 1) = nets[c]->col(col) - (*target)[c];
            off += m + 1;
        }
    };

    const Eigen::MatrixXd* r_nets[3] = {&fields.r.net(0), &fields.r.net(1), &fields.r.net(2)};
    const Eigen::MatrixXd* ang_nets[3] = {&fields.phi.net(), &fields.theta.net(),
                                          &fields.psi.net()};
    const Eigen::MatrixXd* l_nets[3] = {&fields.l.net(0), &fields.l.net(1), &fields.l.net(2)};
    const Eigen::MatrixXd* h_nets[3] = {&fields.h.net(0), &fields.h.net(1), &fields.h.net(2)};
    const Eigen::MatrixXd* v_nets[3] = {&fields.v.net(0), &fields.v.net(1), &fields.v.net(2)};
    const Eigen::MatrixXd* w_nets[3] = {&fields.omega.net(0), &fields.omega.net(1),
                                        &fields.omega.net(2)};

    emit(bc.initial.r, r_nets, 0);
    emit(bc.initial.angles, ang_nets, 0);
    emit(bc.initial.l, l_nets, 0);
    emit(bc.initial.h, h_nets, 0);
    emit(bc.initial.v, v_nets, 0);
    emit(bc.initial.omega, w_nets, 0);
    emit(bc.final_edge.r, r_nets, n);
    emit(bc.final_edge.angles, ang_nets, n);
    emit(bc.final_edge.l, l_nets, n);
    emit(bc.final_edge.h, h_nets, n);
    emit(bc.final_edge.v, v_nets, n);
    emit(bc.final_edge.omega, w_nets, n);
    return out;
}

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

struct RunningCostArgs {
    Eigen::Vector3d r;
    Eigen::Matrix3d rot;
    Eigen::Vector3d l, h, v, omega;
};

struct CostSpec {
    enum class Mode { LeaderTracking, Running };
    Mode mode = Mode::LeaderTracking;
    Eigen::Vector3d r_des_0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d th_des_0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d r_des_f = Eigen::Vector3d::Zero();
    Eigen::Vector3d th_des_f = Eigen::Vector3d::Zero();
    std::function<double(const RunningCostArgs&)> running;
    double rho_tf = 0.0;
};

inline CostSpec build_cost_spec(const Scenario& sc) {
    CostSpec spec;
    spec.rho_tf = sc.cost.rho_tf;
    Eigen::VectorXd ends(2);
    ends << 0.0, sc.s_f;
    const auto poses = sample_formation(sc.final_formation, sc.final_attitude, ends, sc.s_f);
    spec.r_des_0 = poses.front().position;
    spec.th_des_0 = poses.front().rpy;
    spec.r_des_f = poses.back().position;
    spec.th_des_f = poses.back().rpy;
    if (sc.cost.kind == CostConfig::Kind::RunningEffort) {
        spec.mode = CostSpec::Mode::Running;
        spec.running = [](const RunningCostArgs& a) {
            return a.v.squaredNorm() + a.omega.squaredNorm();
        };
    }
    return spec;
}

inline double build_cost(const CostSpec& spec, const RodFields& fields, double t_f) {
    fields.require_consistent();
    if (std::abs(fields.domain_t() - t_f) > 1e-9 * std::max(1.0, t_f))
        throw std::invalid_argument("build_cost: t_f disagrees with the field domain");

    if (spec.mode == CostSpec::Mode::Running) {
        const int m = fields.degree_s(), n = fields.degree_t();
        const double ws = fields.domain_s() / (m + 1), wt = t_f / (n + 1);
        double acc = 0.0;
        for (int i = 0; i <= m; ++i) {
            for (int j = 0; j <= n; ++j) {
                RunningCostArgs args;
                args.r = fields.r.point(i, j);
                args.rot = rotation_from_euler(fields.phi.net()(i, j), fields.theta.net()(i, j),
                                               fields.psi.net()(i, j));
                args.l = fields.l.point(i, j);
                args.h = fields.h.point(i, j);
                args.v = fields.v.point(i, j);
                args.omega = fields.omega.point(i, j);
                acc += ws * wt * spec.running(args);
            }
        }
        return acc + spec.rho_tf * t_f;
    }

    auto angles_edge = [&](SurfaceEdge which) {
        return VectorCurve({fields.phi.edge(which).channel(0),
                            fields.theta.edge(which).channel(0),
                            fields.psi.edge(which).channel(0)},
                           t_f);
    };
    auto tracking = [&](const VectorCurve& edge, const Eigen::Vector3d& target) {
        return norm_sq(edge - VectorCurve::constant(target, edge.degree(), t_f)).integrate();
    };

    double cost = tracking(fields.r.edge(SurfaceEdge::SMin), spec.r_des_0) +
                  tracking(angles_edge(SurfaceEdge::SMin), spec.th_des_0) +
                  tracking(fields.r.edge(SurfaceEdge::SMax), spec.r_des_f) +
                  tracking(angles_edge(SurfaceEdge::SMax), spec.th_des_f);
    return cost + spec.rho_tf * t_f;
}

// ---------------------------------------------------------------------------
// Constraint builders
// ---------------------------------------------------------------------------

// Coefficient inequalities on the degree-(2m,2n) norm-squared surfaces, in the
// blocks [strain lower, strain upper, bending, velocity, angular velocity],
// each flattened column-major. All entries use the <= 0 convention.
inline Eigen::VectorXd build_bound_constraints(const RodFields& fields,
                                               const FeasibilityBounds& bounds) {
    fields.require_consistent();
    const ScalarSurface l_sq = norm_sq(fields.l);
    const ScalarSurface h_sq = norm_sq(fields.h);
    const ScalarSurface v_sq = norm_sq(fields.v);
    const ScalarSurface w_sq = norm_sq(fields.omega);
    const int count = static_cast<int>(l_sq.net().size());

    Eigen::VectorXd out(5 * count);
    auto flat = [](const ScalarSurface& s) {
        return Eigen::Map<const Eigen::VectorXd>(s.net().data(), s.net().size());
    };
    out.segment(0, count) = bounds.nu_min * bounds.nu_min - flat(l_sq).array();
    out.segment(count, count) = flat(l_sq).array() - bounds.nu_max * bounds.nu_max;
    out.segment(2 * count, count) = flat(h_sq).array() - bounds.mu_max * bounds.mu_max;
    out.segment(3 * count, count) = flat(v_sq).array() - bounds.v_max * bounds.v_max;
    out.segment(4 * count, count) = flat(w_sq).array() - bounds.omega_max * bounds.omega_max;
    return out;
}

inline Eigen::VectorXd build_dynamics_constraints(const RodFields& fields,
                                                  const CollocationGrid& grid) {
    return kinematic_residuals(fields, grid);
}

// One row per obstacle: epsilon minus the certified clearance lower bound at
// the fixed subdivision depth (unclamped for spheres so the optimizer sees a
// gradient while penetrating).
inline Eigen::VectorXd build_obstacle_constraints(const RodFields& fields,
                                                  const std::vector<Obstacle>& obstacles,
                                                  double epsilon, int depth) {
    Eigen::VectorXd out(static_cast<int>(obstacles.size()));
    for (size_t k = 0; k < obstacles.size(); ++k) {
        const auto bounds =
            surface_min_distance(fields.r, obstacles[k], {epsilon, depth});
        out[static_cast<int>(k)] = epsilon - bounds.signed_lower;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Agent extraction
// ---------------------------------------------------------------------------

struct AgentSampler {
    int n_v = 1;
    double s_f = 1.0;
    double station(int i) const { return s_f * i / n_v; }  // i = 1..n_v, in (0, s_f]
};

struct AgentState {
    double t = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();      // body frame
    Eigen::Vector3d angular_rate = Eigen::Vector3d::Zero();  // body frame
};

struct AgentTrajectory {
    int agent = 0;
    double s = 0.0;
    std::vector<AgentState> states;
};

inline std::vector<AgentTrajectory> extract_agents(const RodFields& fields, int n_v,
                                                   const std::vector<double>& t_samples) {
    if (n_v < 1) throw std::invalid_argument("extract_agents: need at least one agent");
    fields.require_consistent();
    AgentSampler sampler{n_v, fields.domain_s()};
    std::vector<AgentTrajectory> out(n_v);
    for (int i = 1; i <= n_v; ++i) {
        AgentTrajectory& traj = out[i - 1];
        traj.agent = i;
        traj.s = sampler.station(i);
        traj.states.reserve(t_samples.size());
        for (double t : t_samples) {
            AgentState st;
            st.t = t;
            st.position = fields.r.eval(traj.s, t);
            st.rpy = Eigen::Vector3d(fields.phi.eval(traj.s, t), fields.theta.eval(traj.s, t),
                                     fields.psi.eval(traj.s, t));
            st.velocity = fields.v.eval(traj.s, t);
            st.angular_rate = fields.omega.eval(traj.s, t);
            traj.states.push_back(st);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fast fused evaluator and problem assembly
// ---------------------------------------------------------------------------

class NlpEvaluator {
public:
    explicit NlpEvaluator(const Scenario& sc)
        : sc_(sc), lay_{sc.m, sc.n, sc.s_f}, ns_(sc.nodes_s()), nt_(sc.nodes_t()) {
        sc_.validate();
        const int m = sc.m, n = sc.n;

        bs_.resize(m + 1, ns_);
        for (int i = 0; i < ns_; ++i) {
            const double frac = ns_ > 1 ? double(i) / (ns_ - 1) : 0.0;
            for (int a = 0; a <= m; ++a) bs_(a, i) = bernstein_basis(a, m, frac, 1.0);
        }
        bt_.resize(n + 1, nt_);
        for (int j = 0; j < nt_; ++j) {
            const double frac = nt_ > 1 ? double(j) / (nt_ - 1) : 0.0;
            for (int b = 0; b <= n; ++b) bt_(b, j) = bernstein_basis(b, n, frac, 1.0);
        }
        s_nodes_ = Eigen::VectorXd::LinSpaced(ns_, 0.0, sc.s_f);

        ds_ = differentiation_matrix(m, sc.s_f).entries.transpose();
        dt_unit_ = differentiation_matrix(n, 1.0).entries;

        w1_ = product_weights(m);
        w2_ = product_weights(n);

        bc_ = build_boundary_conditions(sc);
        cost_ = build_cost_spec(sc);
        collect_pinned_edges();

        num_eq_ = 12 * ns_ * nt_ + bc_.initial.rows(m) + bc_.final_edge.rows(m);
        num_ineq_ = 5 * (2 * m + 1) * (2 * n + 1) + static_cast<int>(sc.obstacles.size());

        eq_blocks_ = {{"dynamics", 0, 12 * ns_ * nt_},
                      {"boundary_initial", 12 * ns_ * nt_, bc_.initial.rows(m)}};
        if (bc_.final_edge.rows(m) > 0)
            eq_blocks_.push_back({"boundary_final", 12 * ns_ * nt_ + bc_.initial.rows(m),
                                  bc_.final_edge.rows(m)});
        const int nsq_count = (2 * m + 1) * (2 * n + 1);
        ineq_blocks_ = {{"strain_lower", 0, nsq_count},
                        {"strain_upper", nsq_count, nsq_count},
                        {"bending", 2 * nsq_count, nsq_count},
                        {"velocity", 3 * nsq_count, nsq_count},
                        {"angular_velocity", 4 * nsq_count, nsq_count}};
        if (!sc.obstacles.empty())
            ineq_blocks_.push_back(
                {"obstacle", 5 * nsq_count, static_cast<int>(sc.obstacles.size())});
    }

    const VariableLayout& layout() const { return lay_; }
    int num_equality() const { return num_eq_; }
    int num_inequality() const { return num_ineq_; }
    const std::vector<ConstraintBlock>& equality_blocks() const { return eq_blocks_; }
    const std::vector<ConstraintBlock>& inequality_blocks() const { return ineq_blocks_; }
    const CostSpec& cost_spec() const { return cost_; }
    const BoundaryConditions& boundary_conditions() const { return bc_; }
    const Scenario& scenario() const { return sc_; }

    CollocationGrid grid(double t_f) const {
        return CollocationGrid::uniform(ns_, nt_, sc_.s_f, t_f);
    }

    // Cold-start guess per the case studies: a static point surface with
    // constant attitude at the initial-formation midpoint. Infeasible by
    // construction (zero strain violates the lower strain bound).
    Eigen::VectorXd initial_guess() const {
        Eigen::VectorXd mid_nodes(1);
        mid_nodes << 0.5 * sc_.s_f;
        const auto mid =
            sample_formation(sc_.initial_formation, sc_.initial_attitude, mid_nodes, sc_.s_f);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(lay_.size());
        const int nsz = lay_.net_size();
        for (int c = 0; c < 3; ++c)
            x.segment(lay_.field_offset(c), nsz).setConstant(mid.front().position[c]);
        x[lay_.t_f_index()] = sc_.t_init;
        return x;
    }

    Eigen::VectorXd lower_bounds() const { return box_bounds(-1.0); }
    Eigen::VectorXd upper_bounds() const { return box_bounds(+1.0); }

    // Fused evaluation; each output pointer may be null. Thread-safe through
    // a per-thread workspace, re-entrant across concurrent FD perturbations.
    void eval(const Eigen::VectorXd& x, double* f, Eigen::VectorXd* eq,
              Eigen::VectorXd* ineq) const {
        if (x.size() != lay_.size())
            throw std::invalid_argument("NlpEvaluator: decision vector length mismatch");
        const int m = sc_.m, n = sc_.n;
        const int mp = m + 1, np = n + 1;
        const double t_f = x[lay_.t_f_index()];
        if (!(t_f > 0.0)) throw std::domain_error("NlpEvaluator: nonpositive t_f");

        auto net = [&](int k) {
            return Eigen::Map<const Eigen::MatrixXd>(x.data() + lay_.field_offset(k), mp, np);
        };
        Work& w = work();
        w.ensure(mp, np, ns_, nt_);

        auto to_grid = [&](const auto& netm, Eigen::MatrixXd& out) {
            w.tmp.noalias() = netm * bt_;
            out.noalias() = bs_.transpose() * w.tmp;
        };

        if (eq != nullptr || f != nullptr) {
            for (int c = 0; c < 3; ++c) {
                w.ang_net[c] = net(3 + c);
            }
        }

        if (eq != nullptr) {
            eq->resize(num_eq_);
            for (int c = 0; c < 3; ++c) {
                w.rs[c].noalias() = ds_ * net(c);
                w.rt[c].noalias() = net(c) * dt_unit_;
                w.rt[c] *= 1.0 / t_f;
                w.angs[c].noalias() = ds_ * w.ang_net[c];
                w.angt[c].noalias() = w.ang_net[c] * dt_unit_;
                w.angt[c] *= 1.0 / t_f;
            }
            for (int c = 0; c < 3; ++c) {
                to_grid(w.rs[c], w.g_rs[c]);
                to_grid(w.rt[c], w.g_rt[c]);
                to_grid(w.ang_net[c], w.g_ang[c]);
                to_grid(w.angs[c], w.g_angs[c]);
                to_grid(w.angt[c], w.g_angt[c]);
                to_grid(net(6 + c), w.g_l[c]);
                to_grid(net(9 + c), w.g_h[c]);
                to_grid(net(12 + c), w.g_v[c]);
                to_grid(net(15 + c), w.g_w[c]);
            }

            for (int i = 0; i < ns_; ++i) {
                for (int j = 0; j < nt_; ++j) {
                    const double phi = w.g_ang[0](i, j);
                    const double theta = w.g_ang[1](i, j);
                    const double psi = w.g_ang[2](i, j);
                    const double cf = std::cos(phi), sf = std::sin(phi);
                    const double ct = std::cos(theta), st = std::sin(theta);
                    const double cp = std::cos(psi), sp = std::sin(psi);
                    if (std::abs(ct) <= kGimbalCosTolerance)
                        throw GimbalLockError(s_nodes_[i], t_f * j / (nt_ - 1));

                    // R = Rz(psi) Ry(theta) Rx(phi), row-wise
                    const double r00 = cp * ct, r01 = cp * st * sf - sp * cf,
                                 r02 = cp * st * cf + sp * sf;
                    const double r10 = sp * ct, r11 = sp * st * sf + cp * cf,
                                 r12 = sp * st * cf - cp * sf;
                    const double r20 = -st, r21 = ct * sf, r22 = ct * cf;

                    const int base = 12 * (i * nt_ + j);
                    double* out = eq->data() + base;

                    const double lx = w.g_l[0](i, j), ly = w.g_l[1](i, j), lz = w.g_l[2](i, j);
                    out[0] = w.g_rs[0](i, j) - (r00 * lx + r01 * ly + r02 * lz);
                    out[1] = w.g_rs[1](i, j) - (r10 * lx + r11 * ly + r12 * lz);
                    out[2] = w.g_rs[2](i, j) - (r20 * lx + r21 * ly + r22 * lz);

                    const double vx = w.g_v[0](i, j), vy = w.g_v[1](i, j), vz = w.g_v[2](i, j);
                    out[3] = w.g_rt[0](i, j) - (r00 * vx + r01 * vy + r02 * vz);
                    out[4] = w.g_rt[1](i, j) - (r10 * vx + r11 * vy + r12 * vz);
                    out[5] = w.g_rt[2](i, j) - (r20 * vx + r21 * vy + r22 * vz);

                    // E(phi, theta) * rates
                    const double ps = w.g_angs[0](i, j), ts = w.g_angs[1](i, j),
                                 ss = w.g_angs[2](i, j);
                    out[6] = ps - st * ss - w.g_h[0](i, j);
                    out[7] = cf * ts + ct * sf * ss - w.g_h[1](i, j);
                    out[8] = -sf * ts + ct * cf * ss - w.g_h[2](i, j);

                    const double pt = w.g_angt[0](i, j), tt = w.g_angt[1](i, j),
                                 stt = w.g_angt[2](i, j);
                    out[9] = pt - st * stt - w.g_w[0](i, j);
                    out[10] = cf * tt + ct * sf * stt - w.g_w[1](i, j);
                    out[11] = -sf * tt + ct * cf * stt - w.g_w[2](i, j);
                }
            }

            int off = 12 * ns_ * nt_;
            for (const auto& pe : pinned_) {
                eq->segment(off, mp) = net(pe.field).col(pe.col) - pe.target;
                off += mp;
            }
        }

        if (ineq != nullptr) {
            ineq->resize(num_ineq_);
            const int nsq_count = (2 * m + 1) * (2 * n + 1);
            const double nu_min2 = sc_.bounds.nu_min * sc_.bounds.nu_min;
            const double nu_max2 = sc_.bounds.nu_max * sc_.bounds.nu_max;
            const double mu2 = sc_.bounds.mu_max * sc_.bounds.mu_max;
            const double v2 = sc_.bounds.v_max * sc_.bounds.v_max;
            const double om2 = sc_.bounds.omega_max * sc_.bounds.omega_max;

            norm_sq_coeffs(net(6), net(7), net(8), w.nsq);
            for (int k = 0; k < nsq_count; ++k) {
                (*ineq)[k] = nu_min2 - w.nsq.data()[k];
                (*ineq)[nsq_count + k] = w.nsq.data()[k] - nu_max2;
            }
            norm_sq_coeffs(net(9), net(10), net(11), w.nsq);
            for (int k = 0; k < nsq_count; ++k) (*ineq)[2 * nsq_count + k] = w.nsq.data()[k] - mu2;
            norm_sq_coeffs(net(12), net(13), net(14), w.nsq);
            for (int k = 0; k < nsq_count; ++k) (*ineq)[3 * nsq_count + k] = w.nsq.data()[k] - v2;
            norm_sq_coeffs(net(15), net(16), net(17), w.nsq);
            for (int k = 0; k < nsq_count; ++k) (*ineq)[4 * nsq_count + k] = w.nsq.data()[k] - om2;

            if (!sc_.obstacles.empty()) {
                VectorSurface r_surf({net(0), net(1), net(2)}, sc_.s_f, t_f);
                for (size_t k = 0; k < sc_.obstacles.size(); ++k) {
                    const auto bounds = surface_min_distance(
                        r_surf, sc_.obstacles[k], {sc_.epsilon, sc_.obstacle_depth});
                    (*ineq)[5 * nsq_count + static_cast<int>(k)] =
                        sc_.epsilon - bounds.signed_lower;
                }
            }
        }

        if (f != nullptr) {
            if (cost_.mode == CostSpec::Mode::LeaderTracking) {
                double acc = 0.0;
                acc += edge_tracking(net(0), net(1), net(2), 0, cost_.r_des_0, t_f);
                acc += edge_tracking(w.ang_net[0], w.ang_net[1], w.ang_net[2], 0, cost_.th_des_0,
                                     t_f);
                acc += edge_tracking(net(0), net(1), net(2), m, cost_.r_des_f, t_f);
                acc += edge_tracking(w.ang_net[0], w.ang_net[1], w.ang_net[2], m, cost_.th_des_f,
                                     t_f);
                *f = acc + cost_.rho_tf * t_f;
            } else {
                const double ws = sc_.s_f / mp, wt = t_f / np;
                double acc = 0.0;
                for (int i = 0; i < mp; ++i) {
                    for (int j = 0; j < np; ++j) {
                        RunningCostArgs args;
                        args.r = Eigen::Vector3d(net(0)(i, j), net(1)(i, j), net(2)(i, j));
                        args.rot = rotation_from_euler(net(3)(i, j), net(4)(i, j), net(5)(i, j));
                        args.l = Eigen::Vector3d(net(6)(i, j), net(7)(i, j), net(8)(i, j));
                        args.h = Eigen::Vector3d(net(9)(i, j), net(10)(i, j), net(11)(i, j));
                        args.v = Eigen::Vector3d(net(12)(i, j), net(13)(i, j), net(14)(i, j));
                        args.omega =
                            Eigen::Vector3d(net(15)(i, j), net(16)(i, j), net(17)(i, j));
                        acc += ws * wt * cost_.running(args);
                    }
                }
                *f = acc + cost_.rho_tf * t_f;
            }
        }
    }

private:
    struct PinnedEdge {
        int field;
        int col;
        Eigen::VectorXd target;
    };

    struct Work {
        Eigen::MatrixXd rs[3], rt[3], angs[3], angt[3], ang_net[3];
        Eigen::MatrixXd g_rs[3], g_rt[3], g_ang[3], g_angs[3], g_angt[3];
        Eigen::MatrixXd g_l[3], g_h[3], g_v[3], g_w[3];
        Eigen::MatrixXd tmp, nsq;

        void ensure(int mp, int np, int ns, int nt) {
            if (tmp.rows() == mp && tmp.cols() == nt && g_rs[0].rows() == ns &&
                nsq.rows() == 2 * mp - 1)
                return;
            for (int c = 0; c < 3; ++c) {
                rs[c].resize(mp, np);
                rt[c].resize(mp, np);
                angs[c].resize(mp, np);
                angt[c].resize(mp, np);
                ang_net[c].resize(mp, np);
                g_rs[c].resize(ns, nt);
                g_rt[c].resize(ns, nt);
                g_ang[c].resize(ns, nt);
                g_angs[c].resize(ns, nt);
                g_angt[c].resize(ns, nt);
                g_l[c].resize(ns, nt);
                g_h[c].resize(ns, nt);
                g_v[c].resize(ns, nt);
                g_w[c].resize(ns, nt);
            }
            tmp.resize(mp, nt);
            nsq.resize(2 * mp - 1, 2 * np - 1);
        }
    };

    static Work& work() {
        static thread_local Work w;
        return w;
    }

    static Eigen::MatrixXd product_weights(int k) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * k + 1, k + 1);
        for (int e = 0; e <= 2 * k; ++e) {
            const double denom = binomial(2 * k, e);
            for (int q = std::max(0, e - k); q <= std::min(k, e); ++q)
                w(e, q) = binomial(k, q) * binomial(k, e - q) / denom;
        }
        return w;
    }

    // Coefficients of |(x,y,z)|^2 at degree (2m, 2n) into out.
    template <typename NetT>
    void norm_sq_coeffs(const NetT& x, const NetT& y, const NetT& z, Eigen::MatrixXd& out) const {
        const int m = sc_.m, n = sc_.n;
        for (int e = 0; e <= 2 * m; ++e) {
            const int qlo = std::max(0, e - m), qhi = std::min(m, e);
            for (int fidx = 0; fidx <= 2 * n; ++fidx) {
                const int rlo = std::max(0, fidx - n), rhi = std::min(n, fidx);
                double acc = 0.0;
                for (int q = qlo; q <= qhi; ++q) {
                    const double wq = w1_(e, q);
                    for (int r = rlo; r <= rhi; ++r) {
                        const double wqr = wq * w2_(fidx, r);
                        acc += wqr * (x(q, r) * x(e - q, fidx - r) + y(q, r) * y(e - q, fidx - r) +
                                      z(q, r) * z(e - q, fidx - r));
                    }
                }
                out(e, fidx) = acc;
            }
        }
    }

    // Exact integral over [0, t_f] of |edge - target|^2 for a row edge.
    template <typename NetT>
    double edge_tracking(const NetT& x, const NetT& y, const NetT& z, int row,
                         const Eigen::Vector3d& target, double t_f) const {
        const int n = sc_.n;
        double acc = 0.0;
        for (int e = 0; e <= 2 * n; ++e) {
            const int rlo = std::max(0, e - n), rhi = std::min(n, e);
            for (int r = rlo; r <= rhi; ++r) {
                const double wr = w2_(e, r);
                acc += wr * ((x(row, r) - target[0]) * (x(row, e - r) - target[0]) +
                             (y(row, r) - target[1]) * (y(row, e - r) - target[1]) +
                             (z(row, r) - target[2]) * (z(row, e - r) - target[2]));
            }
        }
        return acc * t_f / (2 * n + 1);
    }

    void collect_pinned_edges() {
        const int n = sc_.n;
        auto push = [&](const std::optional<std::array<Eigen::VectorXd, 3>>& target,
                        int first_field, int col) {
            if (!target) return;
            for (int c = 0; c < 3; ++c)
                pinned_.push_back({first_field + c, col, (*target)[c]});
        };
        push(bc_.initial.r, 0, 0);
        push(bc_.initial.angles, 3, 0);
        push(bc_.initial.l, 6, 0);
        push(bc_.initial.h, 9, 0);
        push(bc_.initial.v, 12, 0);
        push(bc_.initial.omega, 15, 0);
        push(bc_.final_edge.r, 0, n);
        push(bc_.final_edge.angles, 3, n);
        push(bc_.final_edge.l, 6, n);
        push(bc_.final_edge.h, 9, n);
        push(bc_.final_edge.v, 12, n);
        push(bc_.final_edge.omega, 15, n);
    }

    Eigen::VectorXd box_bounds(double sign) const {
        const int nsz = lay_.net_size();
        Eigen::VectorXd b(lay_.size());
        double angle_box = 2.0 * M_PI;
        for (const auto* t : {&bc_.initial.angles, &bc_.final_edge.angles})
            if (t->has_value())
                for (const auto& ch : **t)
                    angle_box = std::max(angle_box, ch.cwiseAbs().maxCoeff() + M_PI);
        auto set = [&](int field, double mag) {
            b.segment(lay_.field_offset(field), nsz).setConstant(sign * mag);
        };
        for (int c = 0; c < 3; ++c) set(c, 10.0);          // r
        set(3, angle_box);                                  // phi
        set(4, sc_.theta_box);                              // theta (gimbal guard)
        set(5, angle_box);                                  // psi
        for (int c = 0; c < 3; ++c) set(6 + c, 2.0 * sc_.bounds.nu_max);
        for (int c = 0; c < 3; ++c) set(9 + c, 2.0 * sc_.bounds.mu_max);
        for (int c = 0; c < 3; ++c) set(12 + c, 2.0 * sc_.bounds.v_max);
        for (int c = 0; c < 3; ++c) set(15 + c, 2.0 * sc_.bounds.omega_max);
        b[lay_.t_f_index()] = sign > 0 ? sc_.t_max : sc_.t_min;
        return b;
    }

    Scenario sc_;
    VariableLayout lay_;
    int ns_, nt_;
    Eigen::MatrixXd bs_, bt_, ds_, dt_unit_, w1_, w2_;
    Eigen::VectorXd s_nodes_;
    BoundaryConditions bc_;
    CostSpec cost_;
    std::vector<PinnedEdge> pinned_;
    std::vector<ConstraintBlock> eq_blocks_, ineq_blocks_;
    int num_eq_ = 0, num_ineq_ = 0;
};

// Wire the full problem: cost, dynamics, boundary, bound, and obstacle
// blocks over the packed decision vector.
inline NlpProblem assemble(const Scenario& sc) {
    auto ev = std::make_shared<NlpEvaluator>(sc);
    NlpProblem p;
    p.x0 = ev->initial_guess();
    p.lower = ev->lower_bounds();
    p.upper = ev->upper_bounds();
    p.num_equality = ev->num_equality();
    p.num_inequality = ev->num_inequality();
    p.equality_blocks = ev->equality_blocks();
    p.inequality_blocks = ev->inequality_blocks();
    p.objective = [ev](const Eigen::VectorXd& x) {
        double f = 0.0;
        ev->eval(x, &f, nullptr, nullptr);
        return f;
    };
    p.equality = [ev](const Eigen::VectorXd& x) {
        Eigen::VectorXd eq;
        ev->eval(x, nullptr, &eq, nullptr);
        return eq;
    };
    p.inequality = [ev](const Eigen::VectorXd& x) {
        Eigen::VectorXd ineq;
        ev->eval(x, nullptr, nullptr, &ineq);
        return ineq;
    };
    p.eval_all = [ev](const Eigen::VectorXd& x, double* f, Eigen::VectorXd* eq,
                      Eigen::VectorXd* ineq) { ev->eval(x, f, eq, ineq); };
    return p;
}

}  // namespace rodopt
