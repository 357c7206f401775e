#pragma once

// Screw-theoretic 6D quantities: twists, wrenches, rotations and poses.
//
// Twists and wrenches share a layout (linear part first, angular second) but
// are distinct types. Inner products between like quantities use a weighted
// metric with a characteristic length rho so that angular parts become
// comparable to linear ones; the wrench-twist pairing is the mechanical power
// and never uses rho.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "forceframe/errors.hpp"

namespace forceframe {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Rotation = Eigen::Matrix3d;

struct MotionTag {};
struct ForceTag {};

template <class Tag>
struct SpatialVector {
    Vec3 linear = Vec3::Zero();
    Vec3 angular = Vec3::Zero();

    SpatialVector() = default;
    SpatialVector(const Vec3& lin, const Vec3& ang) : linear(lin), angular(ang) {}

    static SpatialVector from_vector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
    static SpatialVector zero() { return {}; }

    Vec6 vector() const {
        Vec6 out;
        out << linear, angular;
        return out;
    }

    bool all_finite() const { return linear.allFinite() && angular.allFinite(); }

    SpatialVector operator+(const SpatialVector& o) const { return {linear + o.linear, angular + o.angular}; }
    SpatialVector operator-(const SpatialVector& o) const { return {linear - o.linear, angular - o.angular}; }
    SpatialVector operator-() const { return {-linear, -angular}; }
    SpatialVector operator*(double k) const { return {linear * k, angular * k}; }
    SpatialVector& operator+=(const SpatialVector& o) {
        linear += o.linear;
        angular += o.angular;
        return *this;
    }
    SpatialVector& operator*=(double k) {
        linear *= k;
        angular *= k;
        return *this;
    }
    bool operator==(const SpatialVector& o) const { return linear == o.linear && angular == o.angular; }

    /// Both parts re-expressed in a frame rotated by `r` (i.e. r * part).
    SpatialVector rotated(const Rotation& r) const { return {r * linear, r * angular}; }
};

template <class Tag>
inline SpatialVector<Tag> operator*(double k, const SpatialVector<Tag>& x) {
    return x * k;
}

/// Linear velocity v (m/s), angular velocity w (rad/s).
using Twist = SpatialVector<MotionTag>;
/// Force f (N), moment m (N m). Robot-applied on the environment.
using Wrench = SpatialVector<ForceTag>;

template <class T>
inline constexpr bool is_spatial_v = std::is_same_v<T, Twist> || std::is_same_v<T, Wrench>;

struct MetricScale {
    double rho = 0.1;  // m

    MetricScale() = default;
    explicit MetricScale(double r) : rho(r) {
        if (!(r > 0.0) || !std::isfinite(r)) throw PreconditionViolation("MetricScale rho must be > 0");
    }
};

/// Weighted inner product of like quantities: lin.lin' + rho^2 ang.ang'.
template <class Tag>
inline double inner(const SpatialVector<Tag>& a, const SpatialVector<Tag>& b, const MetricScale& s) {
    return a.linear.dot(b.linear) + s.rho * s.rho * a.angular.dot(b.angular);
}

/// Mechanical power f.v + m.w.
inline double power(const Wrench& w, const Twist& x) {
    return w.linear.dot(x.linear) + w.angular.dot(x.angular);
}

inline double inner(const Wrench& w, const Twist& x, const MetricScale&) { return power(w, x); }
inline double inner(const Twist& x, const Wrench& w, const MetricScale&) { return power(w, x); }

template <class Tag>
inline double weighted_norm(const SpatialVector<Tag>& a, const MetricScale& s) {
    return std::sqrt(inner(a, a, s));
}

/// Metric dual: the quantity of the other kind whose power pairing with any
/// y equals the weighted inner product of x with y.
inline Wrench metric_dual(const Twist& x, const MetricScale& s) {
    return {x.linear, s.rho * s.rho * x.angular};
}
inline Twist metric_dual(const Wrench& w, const MetricScale& s) {
    return {w.linear, s.rho * s.rho * w.angular};
}

inline constexpr double kZeroNorm = 1e-12;

/// Component of `b` along `a`. Subtracting it leaves a residual orthogonal to
/// `a` under the weighted metric (like kinds) or with zero mechanical power
/// (mixed kinds).
template <class B, class A>
    requires(is_spatial_v<A> && is_spatial_v<B>)
inline B project(const B& b, const A& a, const MetricScale& s) {
    const double nn = inner(a, a, s);
    if (!(std::sqrt(nn) > kZeroNorm)) throw ZeroVector("cannot project onto a zero spatial vector");
    const double c = inner(b, a, s) / nn;
    if constexpr (std::is_same_v<A, B>) {
        return a * c;
    } else {
        return metric_dual(a, s) * c;
    }
}

/// Direction of the screw axis: the linear part if it exceeds `threshold`,
/// otherwise the angular part (pure couple / pure rotation).
template <class Tag>
inline Vec3 screw_axis_direction(const SpatialVector<Tag>& x, const MetricScale& s, double threshold) {
    const double lin = x.linear.norm();
    if (lin > threshold && lin > kZeroNorm) return x.linear / lin;
    const double ang = x.angular.norm();
    if (ang > kZeroNorm && s.rho * ang > kZeroNorm) return x.angular / ang;
    if (lin > kZeroNorm) return x.linear / lin;
    throw ZeroVector("screw axis undefined for a negligible spatial vector");
}

inline constexpr double kTraceClamp = 1e-12;

/// Geodesic distance on SO(3) in radians, in [0, pi].
inline double geodesic_angle(const Rotation& r1, const Rotation& r2) {
    double c = ((r1.transpose() * r2).trace() - 1.0) / 2.0;
    c = std::clamp(c, -1.0 + kTraceClamp, 1.0 - kTraceClamp);
    // Near the identity acos loses precision; use the skew part instead.
    const Mat3 rel = r1.transpose() * r2;
    const Vec3 axis_sin(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
    const double s = 0.5 * axis_sin.norm();
    if (c > 0.5) return std::asin(std::min(s, 1.0));
    return std::acos(c);
}

inline bool is_rotation(const Rotation& r, double tol = 1e-9) {
    if (!r.allFinite()) return false;
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - 1.0) <= tol;
}

inline Rotation rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Rotation rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Rotation rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Rotation vector of r (axis * angle).
inline Vec3 log_so3(const Rotation& r) {
    const Eigen::AngleAxisd aa(r);
    return aa.axis() * aa.angle();
}

inline Rotation exp_so3(const Vec3& phi) {
    const double a = phi.norm();
    if (a < 1e-15) return Mat3::Identity();
    return Eigen::AngleAxisd(a, phi / a).toRotationMatrix();
}

/// Block-diagonal spatial rotation diag(r, r).
inline Mat6 spatial_rotation(const Rotation& r) {
    Mat6 phi = Mat6::Zero();
    phi.topLeftCorner<3, 3>() = r;
    phi.bottomRightCorner<3, 3>() = r;
    return phi;
}

/// End-effector pose. Orientation is stored as a unit quaternion so that logs
/// round-trip bit-exactly.
struct Pose {
    Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
    Vec3 position = Vec3::Zero();

    Pose() = default;
    Pose(const Eigen::Quaterniond& q, const Vec3& p) : orientation(q), position(p) {}
    Pose(const Rotation& r, const Vec3& p) : orientation(Eigen::Quaterniond(r)), position(p) {
        orientation.normalize();
    }

    Rotation rotation() const { return orientation.toRotationMatrix(); }
    bool all_finite() const { return orientation.coeffs().allFinite() && position.allFinite(); }
};

}  // namespace forceframe
