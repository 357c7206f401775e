#pragma once

// Task-mode classification in the interaction frame and the hybrid control
// structure (selection mask + reference wrench) each mode maps to.

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forceframe/demo.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/modes.hpp"
#include "forceframe/recovery.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

struct ClassifierThresholds {
    double contact_norm = 2.0;     // N
    double dominance_ratio = 3.0;
    double omega_min = 0.3;        // rad/s
    double fz_min = 2.0;           // N

    void validate() const {
        if (!(contact_norm > 0 && dominance_ratio > 0 && omega_min > 0 && fz_min > 0))
            throw PreconditionViolation("classifier thresholds must be > 0");
    }
};

struct Classification {
    TaskMode mode = TaskMode::Free;
    bool low_confidence = false;
};

inline Classification classify(const Rotation& frame, const Twist& twist, const Wrench& wrench,
                               const ClassifierThresholds& th = {}) {
    th.validate();
    if (!is_rotation(frame, 1e-6)) throw PreconditionViolation("frame is not a rotation");
    const Vec3 f = frame.transpose() * wrench.linear;
    const Vec3 w = frame.transpose() * twist.angular;
    if (f.norm() < th.contact_norm) return {TaskMode::Free, false};
    if (std::abs(w.z()) >= th.omega_min && std::abs(f.z()) >= th.fz_min) return {TaskMode::Rotation, false};
    if (std::abs(f.x()) >= th.dominance_ratio * std::hypot(f.y(), f.z())) return {TaskMode::Insertion, false};
    if (std::abs(f.z()) >= th.dominance_ratio * std::hypot(f.x(), f.y())) return {TaskMode::Surface, false};
    return {TaskMode::Surface, true};
}

inline TaskMode classify_mode(const Rotation& frame, const Twist& twist, const Wrench& wrench,
                              const ClassifierThresholds& th = {}) {
    return classify(frame, twist, wrench, th).mode;
}

enum class InsertionPolicy { literal, axial_force };

inline std::optional<InsertionPolicy> parse_insertion_policy(std::string_view s) {
    if (s == "literal") return InsertionPolicy::literal;
    if (s == "axial_force") return InsertionPolicy::axial_force;
    return std::nullopt;
}

inline std::string_view to_string(InsertionPolicy p) {
    return p == InsertionPolicy::literal ? "literal" : "axial_force";
}

struct ControlStructure {
    double t0 = 0.0;
    double t1 = 0.0;
    Rotation frame = Rotation::Identity();
    Vec3 origin = Vec3::Zero();
    TaskMode mode = TaskMode::Free;
    SelectionMask mask{};
    Vec6 ref = Vec6::Zero();  // (f; m) in the frame
    SelectionMask ref_valid{};
    bool low_confidence = false;
};

inline SelectionMask table_mask(TaskMode mode, InsertionPolicy policy = InsertionPolicy::literal) {
    switch (mode) {
        case TaskMode::Free: return {false, false, false, false, false, false};
        case TaskMode::Surface: return {false, false, true, false, false, false};
        case TaskMode::Insertion:
            if (policy == InsertionPolicy::axial_force) return {true, true, true, true, true, true};
            return {false, true, true, false, true, true};
        case TaskMode::Rotation: return {false, false, true, false, false, false};
    }
    return {};
}

/// `measured` is the frame-resolved reference source (normally the filtered
/// window wrench, see filtered_window_wrench).
inline ControlStructure control_structure_for(TaskMode mode, const Rotation& frame, const Wrench& measured,
                                              InsertionPolicy policy = InsertionPolicy::literal) {
    ControlStructure cs;
    cs.mode = mode;
    cs.frame = mode == TaskMode::Free ? Rotation::Identity() : frame;
    cs.mask = table_mask(mode, policy);
    cs.ref_valid = cs.mask;
    const Vec3 f = frame.transpose() * measured.linear;
    const Vec3 m = frame.transpose() * measured.angular;
    switch (mode) {
        case TaskMode::Free: break;
        case TaskMode::Surface:
        case TaskMode::Rotation: cs.ref(2) = f.z(); break;
        case TaskMode::Insertion:
            if (policy == InsertionPolicy::axial_force) {
                cs.ref(0) = f.x();
                cs.ref(3) = m.x();
            }
            break;
    }
    return cs;
}

/// Second-order Butterworth low-pass (bilinear transform), state initialised
/// to the first input so a constant signal passes unchanged.
class Butterworth2 {
public:
    Butterworth2(double cutoff_hz, double rate_hz) {
        if (!(cutoff_hz > 0.0 && cutoff_hz < 0.5 * rate_hz))
            throw PreconditionViolation("cutoff must be in (0, Nyquist)");
        const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
        const double q = std::numbers::sqrt2;
        const double norm = 1.0 / (1.0 + q * k + k * k);
        b0_ = k * k * norm;
        b1_ = 2.0 * b0_;
        b2_ = b0_;
        a1_ = 2.0 * (k * k - 1.0) * norm;
        a2_ = (1.0 - q * k + k * k) * norm;
    }

    double operator()(double x) {
        if (!primed_) {
            x1_ = x2_ = y1_ = y2_ = x;
            primed_ = true;
        }
        const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
        x2_ = x1_;
        x1_ = x;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    double b0_, b1_, b2_, a1_, a2_;
    double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
    bool primed_ = false;
};

/// Low-passed wrench (5 Hz) over the window's samples, last value, in world.
inline Wrench filtered_window_wrench(const Demonstration& demo, std::size_t begin, std::size_t end,
                                     double cutoff_hz = 5.0) {
    std::array<Butterworth2, 6> lp{Butterworth2(cutoff_hz, demo.rate_hz), Butterworth2(cutoff_hz, demo.rate_hz),
                                   Butterworth2(cutoff_hz, demo.rate_hz), Butterworth2(cutoff_hz, demo.rate_hz),
                                   Butterworth2(cutoff_hz, demo.rate_hz), Butterworth2(cutoff_hz, demo.rate_hz)};
    Vec6 y = Vec6::Zero();
    for (std::size_t i = begin; i < end; ++i) {
        const Vec6 x = demo.samples[i].wrench.vector();
        for (int a = 0; a < 6; ++a) y(a) = lp[a](x(a));
    }
    return Wrench::from_vector(y);
}

struct LabelOptions {
    ClassifierThresholds thresholds;
    InsertionPolicy insertion_policy = InsertionPolicy::literal;
    double reference_cutoff_hz = 5.0;
};

/// One control structure per recovery window. Windows without a frame
/// (free space or degenerate geometry) are classified in the identity frame.
inline std::vector<ControlStructure> label_demo(const Demonstration& demo, const std::vector<WindowRecovery>& windows,
                                                const LabelOptions& opt = {}) {
    std::vector<ControlStructure> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        const Rotation frame = w.frame ? w.frame->rotation : Rotation::Identity();
        const auto c = classify(frame, w.mean_twist, w.mean_wrench, opt.thresholds);
        const Wrench ref_src = filtered_window_wrench(demo, w.begin, w.end, opt.reference_cutoff_hz);
        ControlStructure cs = control_structure_for(c.mode, frame, ref_src, opt.insertion_policy);
        cs.t0 = w.t0;
        cs.t1 = w.t1;
        cs.origin = w.frame ? w.frame->origin : w.ee_pose.position;
        cs.low_confidence = c.low_confidence || (w.contact && !w.frame);
        out.push_back(cs);
    }
    return out;
}

/// Fraction of windows whose mode equals the demonstration's label at the
/// window midpoint. Unlabelled demos score 0.
inline double label_accuracy(const Demonstration& demo, const std::vector<ControlStructure>& labels) {
    if (labels.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& cs : labels) {
        const auto gt = demo.label_at(0.5 * (cs.t0 + cs.t1));
        if (gt && gt->mode == cs.mode) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// {"t0","t1","mode","mask":[6],"ref":[6],"ref_valid":[6],"R":[9]}

inline void write_labels(const std::vector<ControlStructure>& labels, std::ostream& out) {
    for (const auto& cs : labels) {
        nlohmann::json mask = nlohmann::json::array(), valid = nlohmann::json::array(),
                       ref = nlohmann::json::array();
        for (int i = 0; i < 6; ++i) {
            mask.push_back(cs.mask[i] ? 1 : 0);
            valid.push_back(cs.ref_valid[i] ? 1 : 0);
            ref.push_back(cs.ref_valid[i] ? cs.ref(i) : 0.0);
        }
        nlohmann::json rec = {{"t0", cs.t0},   {"t1", cs.t1},       {"mode", std::string(to_string(cs.mode))},
                              {"mask", mask},  {"ref", ref},        {"ref_valid", valid},
                              {"R", detail::rotation_json(cs.frame)}};
        out << rec.dump() << '\n';
    }
}

inline std::vector<ControlStructure> read_labels(std::istream& in) {
    std::vector<ControlStructure> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto rec = nlohmann::json::parse(text);
            ControlStructure cs;
            cs.t0 = rec.at("t0").get<double>();
            cs.t1 = rec.at("t1").get<double>();
            const auto mode = parse_task_mode(rec.at("mode").get<std::string>());
            if (!mode) throw ParseError(line, "unknown task mode");
            cs.mode = *mode;
            const auto mask = detail::json_numbers(rec, "mask", 6, line);
            const auto valid = detail::json_numbers(rec, "ref_valid", 6, line);
            const auto ref = detail::json_numbers(rec, "ref", 6, line);
            for (int i = 0; i < 6; ++i) {
                cs.mask[i] = mask[i] != 0;
                cs.ref_valid[i] = valid[i] != 0;
                cs.ref(i) = ref[i];
            }
            cs.frame = detail::rotation_from(detail::json_numbers(rec, "R", 9, line));
            if (!is_rotation(cs.frame, 1e-6)) throw ParseError(line, "R is not a rotation");
            out.push_back(cs);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, e.what());
        }
    }
    return out;
}

}  // namespace forceframe
