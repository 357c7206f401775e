#pragma once

// Velocity-resolved hybrid force/position controller stepping a kinematic
// end-effector against a quasi-static contact environment.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "forceframe/demo.hpp"
#include "forceframe/environment.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/spatial.hpp"
#include "forceframe/task_structure.hpp"

namespace forceframe {

struct ControllerGains {
    double kp_pos = 20.0;     // 1/s, also used for orientation
    double kf_force = 2e-4;   // m/(N s); torque gain is kf_force / rho^2
    double v_max = 0.1;       // m/s; angular limit v_max / rho
    double dt = 1e-3;

    void validate() const {
        if (!(kp_pos > 0 && kf_force >= 0 && v_max > 0 && dt > 0))
            throw PreconditionViolation("controller gains must be positive");
        if (!(kp_pos * dt < 1.0)) throw PreconditionViolation("kp_pos * dt must be < 1");
    }
};

struct SimState {
    Pose ee_pose;
    Twist twist;                     // last commanded twist, world
    Vec6 contact_depth = Vec6::Zero();
    Wrench measured_wrench;          // robot-on-environment, world
    double t = 0.0;
};

struct Target {
    Pose pose;
    Twist velocity;  // feedforward, world
};

struct SimBounds {
    double max_position = 10.0;  // m from origin
    double max_force = 1e6;      // N
};

inline void check_bounds(const SimState& s, const SimBounds& b) {
    const bool finite = s.ee_pose.all_finite() && s.twist.all_finite() && s.measured_wrench.all_finite();
    if (!finite || s.ee_pose.position.norm() > b.max_position || s.measured_wrench.linear.norm() > b.max_force)
        throw Divergence("simulation state left bounds at t=" + std::to_string(s.t));
}

/// Twist command (world) from the hybrid law resolved in the structure frame.
inline Twist hybrid_command(const SimState& state, const ControlStructure& cs, const Target& target,
                            const ControllerGains& g, const MetricScale& scale = {}) {
    const Rotation& r = cs.frame;
    const Rotation rt = r.transpose();
    const Vec3 f = rt * state.measured_wrench.linear;
    const Vec3 m = rt * state.measured_wrench.angular;
    const Vec3 dp = rt * (target.pose.position - state.ee_pose.position);
    const Vec3 dth = rt * log_so3(target.pose.rotation() * state.ee_pose.rotation().transpose());
    const Vec3 ff_v = rt * target.velocity.linear;
    const Vec3 ff_w = rt * target.velocity.angular;
    const double kf_torque = g.kf_force / (scale.rho * scale.rho);

    Vec3 v, w;
    for (int i = 0; i < 3; ++i) {
        v(i) = cs.mask[i] ? g.kf_force * (cs.ref(i) - f(i)) : g.kp_pos * dp(i) + ff_v(i);
        w(i) = cs.mask[i + 3] ? kf_torque * (cs.ref(i + 3) - m(i)) : g.kp_pos * dth(i) + ff_w(i);
    }
    const double vn = v.norm();
    if (vn > g.v_max) v *= g.v_max / vn;
    const double w_max = g.v_max / scale.rho;
    const double wn = w.norm();
    if (wn > w_max) w *= w_max / wn;
    return Twist(r * v, r * w);
}

inline SimState step(const SimState& state, const ControlStructure& cs, const Target& target,
                     const ContactEnvironment& env, const ControllerGains& g, const MetricScale& scale = {},
                     const SimBounds& bounds = {}) {
    const Twist cmd = hybrid_command(state, cs, target, g, scale);
    SimState next;
    next.t = state.t + g.dt;
    next.twist = cmd;
    next.ee_pose = Pose(exp_so3(cmd.angular * g.dt) * state.ee_pose.rotation(), state.ee_pose.position + cmd.linear * g.dt);
    const ContactResponse resp = env.respond(next.ee_pose, cmd);
    next.measured_wrench = resp.total;
    next.contact_depth = resp.deflection;
    check_bounds(next, bounds);
    return next;
}

/// Initial state with the measured wrench evaluated at rest.
inline SimState initial_state(const Pose& pose, const ContactEnvironment& env) {
    SimState s;
    s.ee_pose = pose;
    const ContactResponse r = env.respond(pose, Twist::zero());
    s.measured_wrench = r.total;
    s.contact_depth = r.deflection;
    return s;
}

using TargetFn = std::function<Target(double)>;

/// Structure active at time t: the last one whose t0 <= t (the first before that).
inline const ControlStructure& structure_at(const std::vector<ControlStructure>& seq, double t) {
    if (seq.empty()) throw PreconditionViolation("empty structure sequence");
    const ControlStructure* cur = &seq.front();
    for (const auto& cs : seq)
        if (cs.t0 <= t + 1e-12) cur = &cs;
    return *cur;
}

struct Episode {
    std::vector<SimState> states;  // including the initial state
    Demonstration log;
};

inline Episode run_episode(const SimState& initial, const std::vector<ControlStructure>& structures,
                           const TargetFn& targets, const ContactEnvironment& env, const ControllerGains& g,
                           double duration, const MetricScale& scale = {}, const SimBounds& bounds = {}) {
    g.validate();
    if (!(duration > 0.0)) throw PreconditionViolation("duration must be > 0");
    const auto n = static_cast<std::size_t>(std::llround(duration / g.dt));
    Episode ep;
    ep.states.reserve(n + 1);
    ep.states.push_back(initial);
    SimState s = initial;
    for (std::size_t k = 0; k < n; ++k) {
        s = step(s, structure_at(structures, s.t), targets(s.t), env, g, scale, bounds);
        s.t = initial.t + static_cast<double>(k + 1) * g.dt;
        ep.states.push_back(s);
    }
    ep.log.rate_hz = 1.0 / g.dt;
    ep.log.samples.reserve(ep.states.size());
    for (const auto& st : ep.states) ep.log.samples.push_back({st.t, st.ee_pose, st.twist, st.measured_wrench});
    return ep;
}

/// Spring-wall episode: the wall normal is world z, the target slides along
/// world x at constant speed, and the structure frame is the true frame
/// rotated by `tilt_deg` about x.
struct ForceRegulationSpec {
    TaskMode structure = TaskMode::Surface;
    double ref_fz = 10.0;          // N
    double tilt_deg = 0.0;
    double wall_stiffness = 1e4;   // N/m
    double mu = 0.3;
    double tangential_speed = 0.02;  // m/s
    double duration = 4.0;         // s
    double settle_band = 0.02;     // relative
    double steady_window = 0.5;    // s averaged at the end
    ControllerGains gains;
};

struct ForceRegulationReport {
    double steady_force = 0.0;     // N, world z, mean over the steady window
    double steady_error = 0.0;     // relative to ref_fz
    double settling_time = std::numeric_limits<double>::infinity();
    double max_tangential_error = 0.0;  // m, world x/y tracking
    Episode episode;
};

inline ForceRegulationReport run_force_regulation(const ForceRegulationSpec& spec, const MetricScale& scale = {}) {
    if (!(spec.ref_fz > 0.0)) throw PreconditionViolation("ref_fz must be > 0");
    if (!(spec.steady_window > 0.0) || !(spec.duration > spec.steady_window))
        throw PreconditionViolation("duration must exceed the steady window");
    ContactScenario sc;
    sc.kind = ContactKind::spring_wall;
    sc.wall_stiffness = spec.wall_stiffness;
    sc.mu = spec.mu;
    const ContactEnvironment env(sc);
    const Rotation frame = rot_x(deg2rad(spec.tilt_deg));
    ControlStructure cs = control_structure_for(spec.structure, frame, Wrench(Vec3(0, 0, spec.ref_fz), Vec3::Zero()));
    cs.frame = frame;
    cs.ref(2) = spec.ref_fz;
    const double v = spec.tangential_speed;
    const TargetFn target = [v](double t) {
        Target tg;
        tg.pose.position = Vec3(v * t, 0, 0);
        tg.velocity.linear = Vec3(v, 0, 0);
        return tg;
    };

    ForceRegulationReport r;
    r.episode = run_episode(initial_state(Pose(), env), {cs}, target, env, spec.gains, spec.duration, scale);
    double sum = 0.0;
    std::size_t n = 0;
    double last_out = -1.0;
    for (const auto& st : r.episode.states) {
        const double f = st.measured_wrench.linear.z();
        if (std::abs(f - spec.ref_fz) > spec.settle_band * spec.ref_fz) last_out = st.t;
        const Vec3 p = st.ee_pose.position;
        r.max_tangential_error = std::max(r.max_tangential_error, std::hypot(p.x() - v * st.t, p.y()));
        if (st.t >= spec.duration - spec.steady_window - 1e-12) {
            sum += f;
            ++n;
        }
    }
    r.steady_force = sum / static_cast<double>(n);
    r.steady_error = std::abs(r.steady_force - spec.ref_fz) / spec.ref_fz;
    if (last_out < r.episode.states.back().t) r.settling_time = std::max(0.0, last_out + spec.gains.dt);
    return r;
}

}  // namespace forceframe
