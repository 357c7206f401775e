#pragma once

// Piecewise quintic trajectories over a 6D chart [position; rotation vector],
// the rotation vector taken relative to a fixed base orientation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "forceframe/errors.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

/// Position, velocity and acceleration in chart coordinates.
struct KinState {
    Vec6 x = Vec6::Zero();
    Vec6 v = Vec6::Zero();
    Vec6 a = Vec6::Zero();
};

inline Vec6 to_chart(const Pose& p, const Rotation& base) {
    Vec6 x;
    x << p.position, log_so3(p.rotation() * base.transpose());
    return x;
}

inline Pose from_chart(const Vec6& x, const Rotation& base) {
    return Pose(exp_so3(x.tail<3>()) * base, x.head<3>());
}

class QuinticSegment {
public:
    using Coeffs = Eigen::Matrix<double, 6, 6>;  // row = axis, column = power

    QuinticSegment() = default;

    /// Unique quintic matching (x, v, a) at both ends over duration T.
    static QuinticSegment hermite(double t0, double T, const KinState& s0, const KinState& s1) {
        if (!(T > 0.0)) throw PreconditionViolation("segment duration must be > 0");
        QuinticSegment q;
        q.t0_ = t0;
        q.T_ = T;
        const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
        const Vec6 dp = s1.x - s0.x;
        q.c_.col(0) = s0.x;
        q.c_.col(1) = s0.v;
        q.c_.col(2) = 0.5 * s0.a;
        q.c_.col(3) = (20.0 * dp - (8.0 * s1.v + 12.0 * s0.v) * T - (3.0 * s0.a - s1.a) * T2) / (2.0 * T3);
        q.c_.col(4) = (-30.0 * dp + (14.0 * s1.v + 16.0 * s0.v) * T + (3.0 * s0.a - 2.0 * s1.a) * T2) / (2.0 * T4);
        q.c_.col(5) = (12.0 * dp - 6.0 * (s1.v + s0.v) * T + (s1.a - s0.a) * T2) / (2.0 * T5);
        return q;
    }

    double t0() const { return t0_; }
    double t1() const { return t0_ + T_; }
    double duration() const { return T_; }
    const Coeffs& coefficients() const { return c_; }

    KinState eval(double t) const {
        const double s = t - t0_;
        KinState k;
        k.x = c_.col(0) + s * (c_.col(1) + s * (c_.col(2) + s * (c_.col(3) + s * (c_.col(4) + s * c_.col(5)))));
        k.v = c_.col(1) + s * (2.0 * c_.col(2) + s * (3.0 * c_.col(3) + s * (4.0 * c_.col(4) + s * 5.0 * c_.col(5))));
        k.a = 2.0 * c_.col(2) + s * (6.0 * c_.col(3) + s * (12.0 * c_.col(4) + s * 20.0 * c_.col(5)));
        return k;
    }

    Vec6 jerk(double t) const {
        const double s = t - t0_;
        return 6.0 * c_.col(3) + s * (24.0 * c_.col(4) + s * 60.0 * c_.col(5));
    }

    /// Max linear jerk norm; jerk is quadratic in time, so a dense sample
    /// plus both ends bounds it tightly.
    double max_linear_jerk(int samples = 200) const {
        double m = 0.0;
        for (int i = 0; i <= samples; ++i) {
            const double t = t0_ + T_ * static_cast<double>(i) / samples;
            m = std::max(m, jerk(t).head<3>().norm());
        }
        return m;
    }

private:
    double t0_ = 0.0;
    double T_ = 1.0;
    Coeffs c_ = Coeffs::Zero();
};

/// Finite-difference velocity and acceleration of uniformly spaced samples:
/// central in the interior, second-order one-sided at the ends, so quadratic
/// signals are reproduced exactly.
inline std::pair<std::vector<Vec6>, std::vector<Vec6>> fd_derivatives(const std::vector<Vec6>& x, double dt) {
    const std::size_t n = x.size();
    std::vector<Vec6> v(n, Vec6::Zero()), a(n, Vec6::Zero());
    if (n < 2) return {v, a};
    if (n == 2) {
        v[0] = v[1] = (x[1] - x[0]) / dt;
        return {v, a};
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        v[i] = (x[i + 1] - x[i - 1]) / (2.0 * dt);
        a[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (dt * dt);
    }
    v[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
    v[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
    if (n >= 4) {
        a[0] = (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / (dt * dt);
        a[n - 1] = (2.0 * x[n - 1] - 5.0 * x[n - 2] + 4.0 * x[n - 3] - x[n - 4]) / (dt * dt);
    } else {
        a[0] = a[1];
        a[n - 1] = a[1];
    }
    return {v, a};
}

struct JoinResidual {
    double t = 0.0;
    double position = 0.0;
    double velocity = 0.0;
    double acceleration = 0.0;
};

inline JoinResidual join_residual(double t, const KinState& left, const KinState& right) {
    return {t, (left.x - right.x).head<3>().norm(), (left.v - right.v).head<3>().norm(),
            (left.a - right.a).head<3>().norm()};
}

class Trajectory {
public:
    explicit Trajectory(const Rotation& base = Rotation::Identity()) : base_(base) {}

    /// Stationary at `pose` for all time.
    static Trajectory hold(const Pose& pose, const Rotation& base) {
        Trajectory tr(base);
        tr.rest_.x = to_chart(pose, base);
        return tr;
    }

    const Rotation& base() const { return base_; }
    const std::vector<QuinticSegment>& segments() const { return segs_; }
    bool empty() const { return segs_.empty(); }
    double t_begin() const { return segs_.empty() ? 0.0 : segs_.front().t0(); }
    double t_end() const { return segs_.empty() ? 0.0 : segs_.back().t1(); }

    void append(const QuinticSegment& s) {
        if (!segs_.empty() && std::abs(s.t0() - segs_.back().t1()) > 1e-9)
            throw PreconditionViolation("segments must be contiguous in time");
        segs_.push_back(s);
        rest_ = KinState{};
        rest_.x = s.eval(s.t1()).x;
    }

    void append(const std::vector<QuinticSegment>& ss) {
        for (const auto& s : ss) append(s);
    }

    /// Before the first segment the start state applies; past the last one the
    /// final pose is held at rest.
    KinState eval(double t) const {
        if (segs_.empty()) return rest_;
        if (t <= segs_.front().t0()) return segs_.front().eval(segs_.front().t0());
        if (t >= segs_.back().t1()) return rest_;
        auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                                   [](double tv, const QuinticSegment& s) { return tv < s.t1(); });
        if (it == segs_.end()) --it;
        return it->eval(t);
    }

    Pose pose_at(double t) const { return from_chart(eval(t).x, base_); }

    bool exhausted(double t) const { return segs_.empty() || t >= segs_.back().t1(); }

    /// Largest left/right mismatch over interior segment boundaries.
    JoinResidual max_internal_residual() const {
        JoinResidual worst;
        for (std::size_t i = 1; i < segs_.size(); ++i) {
            const double t = segs_[i].t0();
            const auto r = join_residual(t, segs_[i - 1].eval(t), segs_[i].eval(t));
            if (r.acceleration > worst.acceleration || r.velocity > worst.velocity || r.position > worst.position)
                worst = {t, std::max(worst.position, r.position), std::max(worst.velocity, r.velocity),
                         std::max(worst.acceleration, r.acceleration)};
        }
        return worst;
    }

private:
    Rotation base_;
    std::vector<QuinticSegment> segs_;
    KinState rest_;
};

/// Hermite interpolation through uniformly spaced chart waypoints starting at t0.
inline std::vector<QuinticSegment> hermite_through(const std::vector<Vec6>& x, double t0, double dt,
                                                   std::size_t first = 0) {
    std::vector<QuinticSegment> out;
    if (x.size() < 2) return out;
    const auto [v, a] = fd_derivatives(x, dt);
    for (std::size_t i = first; i + 1 < x.size(); ++i) {
        const double ts = t0 + static_cast<double>(i - first) * dt;
        out.push_back(QuinticSegment::hermite(ts, dt, {x[i], v[i], a[i]}, {x[i + 1], v[i + 1], a[i + 1]}));
    }
    return out;
}

/// Quintic blend from the current state to waypoint n_b of `tail`, followed by
/// Hermite segments through the remaining waypoints. tail[0] is the waypoint
/// due at `t_start`.
inline std::vector<QuinticSegment> blend_append(const KinState& current, double t_start, const std::vector<Vec6>& tail,
                                                double dt, double blend_horizon) {
    if (tail.empty()) throw PreconditionViolation("empty chunk tail");
    if (!(dt > 0.0) || !(blend_horizon >= 0.0)) throw PreconditionViolation("dt > 0 and blend_horizon >= 0 required");
    std::vector<QuinticSegment> out;
    if (tail.size() == 1) {
        out.push_back(QuinticSegment::hermite(t_start, std::max(blend_horizon, dt), current, {tail[0], Vec6::Zero(), Vec6::Zero()}));
        return out;
    }
    const auto [v, a] = fd_derivatives(tail, dt);
    const long nb_raw = std::lround(blend_horizon / dt);
    const std::size_t nb = static_cast<std::size_t>(std::clamp<long>(nb_raw, 1, static_cast<long>(tail.size()) - 1));
    out.push_back(QuinticSegment::hermite(t_start, static_cast<double>(nb) * dt, current, {tail[nb], v[nb], a[nb]}));
    for (std::size_t i = nb; i + 1 < tail.size(); ++i) {
        const double ts = t_start + static_cast<double>(i) * dt;
        out.push_back(QuinticSegment::hermite(ts, dt, {tail[i], v[i], a[i]}, {tail[i + 1], v[i + 1], a[i + 1]}));
    }
    return out;
}

}  // namespace forceframe
