#pragma once

// Quasi-static contact response used by both the demonstration synthesizer
// and the closed-loop simulator: elastic wrench K_env * deflection plus a
// regularized Coulomb term. All wrenches are robot-applied on the environment,
// so friction does positive work on the robot side; the environment-side power
// -friction . twist is never positive.

#include <algorithm>
#include <cmath>

#include "forceframe/contact_models.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

struct ContactResponse {
    Wrench total;
    Wrench elastic;
    Wrench friction;
    Vec6 deflection = Vec6::Zero();  // geometric frame
    double normal_force = 0.0;
    bool in_contact = false;
};

inline constexpr double kStickVelocity = 1e-4;  // m/s

class ContactEnvironment {
public:
    explicit ContactEnvironment(ContactScenario scenario,
                                const Rotation& reference_orientation = Rotation::Identity(),
                                double v_stick = kStickVelocity, int quadrature_n = 64)
        : scenario_(std::move(scenario)),
          reference_(reference_orientation),
          v_stick_(v_stick),
          k_geo_(geometric_stiffness(scenario_, quadrature_n)) {}

    const ContactScenario& scenario() const { return scenario_; }
    const Mat6& geometric_stiffness_matrix() const { return k_geo_; }

    /// Position in the geometric frame.
    Vec3 local_position(const Vec3& p) const {
        return scenario_.ground_truth_frame.transpose() * (p - scenario_.origin);
    }

    ContactResponse respond(const Pose& ee, const Twist& ee_twist) const {
        const Rotation& rg = scenario_.ground_truth_frame;
        const Vec3 u = local_position(ee.position);
        const Vec3 theta = rg.transpose() * log_so3(ee.rotation() * reference_.transpose());
        const Vec3 v = rg.transpose() * ee_twist.linear;
        const Vec3 w = rg.transpose() * ee_twist.angular;

        ContactResponse r;
        Vec6 d = Vec6::Zero();
        Vec3 f_fric = Vec3::Zero();
        Vec3 m_fric = Vec3::Zero();

        switch (scenario_.kind) {
            case ContactKind::spring_wall:
            case ContactKind::winkler_patch: {
                if (u.z() <= 0.0) break;
                r.in_contact = true;
                d << 0, 0, u.z(), 0, 0, 0;
                if (scenario_.kind == ContactKind::winkler_patch) {
                    d(3) = theta.x();
                    d(4) = theta.y();
                }
                r.normal_force = std::max((k_geo_ * d)(2), 0.0);
                const Vec3 vt(v.x(), v.y(), 0.0);
                f_fric = coulomb(r.normal_force, vt);
                break;
            }
            case ContactKind::peg_channel: {
                if (u.x() < 0.0) break;
                r.in_contact = true;
                d << 0, u.y(), u.z(), 0, theta.y(), theta.z();
                const Vec6 el = k_geo_ * d;
                r.normal_force = scenario_.preload + std::hypot(el(1), el(2));
                f_fric = coulomb(r.normal_force, Vec3(v.x(), 0.0, 0.0));
                break;
            }
            case ContactKind::screw: {
                if (u.z() <= 0.0) break;
                r.in_contact = true;
                d << u.x(), u.y(), u.z(), theta.x(), theta.y(), 0;
                r.normal_force = std::max((k_geo_ * d)(2), 0.0);
                const double r_eff = 2.0 / 3.0 * scenario_.a;
                const double slip = std::abs(w.z()) * r_eff;
                if (slip > 0.0) {
                    const double mag = scenario_.mu * r.normal_force * r_eff * std::min(1.0, slip / v_stick_);
                    m_fric = Vec3(0.0, 0.0, std::copysign(mag, w.z()));
                }
                break;
            }
        }

        r.deflection = d;
        const Vec6 el = k_geo_ * d;
        r.elastic = Wrench(rg * el.head<3>(), rg * el.tail<3>());
        r.friction = Wrench(rg * f_fric, rg * m_fric);
        r.total = r.elastic + r.friction;
        return r;
    }

private:
    // Robot-applied Coulomb force along the slip direction, saturating viscous
    // band below v_stick.
    Vec3 coulomb(double normal, const Vec3& slip_velocity) const {
        const double s = slip_velocity.norm();
        if (s <= 0.0 || scenario_.mu == 0.0) return Vec3::Zero();
        return scenario_.mu * normal * std::min(1.0, s / v_stick_) * (slip_velocity / s);
    }

    ContactScenario scenario_;
    Rotation reference_;
    double v_stick_;
    Mat6 k_geo_;
};

}  // namespace forceframe
