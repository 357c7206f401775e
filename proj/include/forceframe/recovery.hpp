#pragma once

// Interaction-frame recovery from windowed twist/wrench signals.
//
// Each window's mean twist and wrench are split into task intent by removing
// the dominant parasitic residual (structural: twist creeping along the
// wrench; dissipative: wrench dragging along the twist). The frame then takes
// z from the wrench intent, x from the twist intent projected off z, falling
// back to a reference vector when the twist is negligible or collinear.

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forceframe/demo.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/modes.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

struct FrameThresholds {
    double eps_xi = 5e-3;           // twist negligibility (weighted norm)
    double eps_parallel = 0.05;     // collinearity margin
    std::optional<Vec3> v_ref;      // unset: current end-effector x-axis
    double force_threshold = 0.5;   // N; wrench negligibility and force-vs-couple split

    void validate() const {
        if (!(eps_parallel > 0.0 && eps_parallel < 1.0)) throw PreconditionViolation("eps_parallel must be in (0,1)");
        if (!(eps_xi >= 0.0) || !(force_threshold >= 0.0)) throw PreconditionViolation("thresholds must be >= 0");
        if (v_ref && !(v_ref->norm() > 0.0)) throw PreconditionViolation("v_ref must be nonzero");
    }
};

struct IntentEstimate {
    Twist xi_star;
    Wrench wrench_star;
    DominanceMode mode_used = DominanceMode::structural;
    double t0 = 0.0;
    double t1 = 0.0;
    bool degenerate = false;  // projected-against vector was negligible
};

struct InteractionFrame {
    Rotation rotation = Rotation::Identity();  // columns x, y, z in world
    Vec3 origin = Vec3::Zero();
    bool fallback_used = false;

    Vec3 x() const { return rotation.col(0); }
    Vec3 y() const { return rotation.col(1); }
    Vec3 z() const { return rotation.col(2); }
};

/// Residual-dominance decomposition. When the vector to orthogonalize against
/// has weighted norm at or below its negligibility bound it carries no usable
/// direction: it is treated as zero and the other quantity passes through.
inline IntentEstimate estimate_intent(const Twist& xi, const Wrench& w, DominanceMode mode, const MetricScale& scale,
                                      double negligible_twist = 1e-9, double negligible_wrench = 1e-9) {
    IntentEstimate out;
    out.mode_used = mode;
    if (mode == DominanceMode::structural) {
        out.wrench_star = w;
        if (weighted_norm(w, scale) <= std::max(negligible_wrench, kZeroNorm)) {
            out.wrench_star = Wrench::zero();
            out.xi_star = xi;
            out.degenerate = true;
        } else {
            out.xi_star = xi - project(xi, w, scale);
        }
    } else {
        out.xi_star = xi;
        if (weighted_norm(xi, scale) <= std::max(negligible_twist, kZeroNorm)) {
            out.xi_star = Twist::zero();
            out.wrench_star = w;
            out.degenerate = true;
        } else {
            out.wrench_star = w - project(w, xi, scale);
        }
    }
    return out;
}

namespace detail {

inline std::optional<Vec3> orthogonal_unit(const Vec3& axis, const Vec3& v) {
    const Vec3 p = v - axis * axis.dot(v);
    const double n = p.norm();
    if (n <= 1e-9) return std::nullopt;
    return Vec3(p / n);
}

inline Rotation from_xz(const Vec3& x, const Vec3& z) {
    Rotation r;
    r.col(0) = x;
    r.col(1) = z.cross(x);
    r.col(2) = z;
    return r;
}

}  // namespace detail

/// Prioritized frame construction anchored at the end-effector.
inline InteractionFrame construct_frame(const IntentEstimate& intent, const FrameThresholds& th, const Pose& ee,
                                        const MetricScale& scale) {
    th.validate();
    const Rotation ee_r = ee.rotation();
    const Vec3 v_ref = th.v_ref ? Vec3(th.v_ref->normalized()) : Vec3(ee_r.col(0));

    InteractionFrame f;
    f.origin = ee.position;

    const bool wrench_ok = weighted_norm(intent.wrench_star, scale) > std::max(th.force_threshold, kZeroNorm);
    const bool twist_ok = weighted_norm(intent.xi_star, scale) > std::max(th.eps_xi, kZeroNorm);

    if (wrench_ok) {
        const Vec3 z = screw_axis_direction(intent.wrench_star, scale, th.force_threshold);
        std::optional<Vec3> x;
        if (twist_ok) {
            const Vec3 n = screw_axis_direction(intent.xi_star, scale, th.eps_xi);
            if (std::abs(z.dot(n)) < 1.0 - th.eps_parallel) x = detail::orthogonal_unit(z, n);
        }
        if (!x) {
            f.fallback_used = true;
            x = detail::orthogonal_unit(z, v_ref);
            if (!x) throw DegenerateFrame("reference vector is collinear with the constraint axis");
        }
        f.rotation = detail::from_xz(*x, z);
    } else if (twist_ok) {
        // Wrench intent negligible: the motion axis is primary and z comes
        // from the reference vector.
        const Vec3 x = screw_axis_direction(intent.xi_star, scale, th.eps_xi);
        f.fallback_used = true;
        const auto z = detail::orthogonal_unit(x, v_ref);
        if (!z) throw DegenerateFrame("reference vector is collinear with the motion axis");
        f.rotation = detail::from_xz(x, *z);
    } else {
        f.fallback_used = true;
        const Vec3 z = ee_r.col(2);
        const auto x = detail::orthogonal_unit(z, v_ref);
        if (!x) throw DegenerateFrame("reference vector is collinear with the end-effector z-axis");
        f.rotation = detail::from_xz(*x, z);
    }
    return f;
}

/// Piecewise-constant dominance labels: breakpoints (t_start, mode), sorted.
class DominanceSchedule {
public:
    DominanceSchedule() = default;
    explicit DominanceSchedule(DominanceMode constant) { breakpoints_.emplace_back(0.0, constant); }

    void add(double t_start, DominanceMode m) {
        if (!breakpoints_.empty() && !(t_start > breakpoints_.back().first))
            throw ConfigError("dominance schedule times must increase");
        breakpoints_.emplace_back(t_start, m);
    }

    bool empty() const { return breakpoints_.empty(); }
    const auto& breakpoints() const { return breakpoints_; }

    DominanceMode mode_at(double t) const {
        if (breakpoints_.empty()) throw ConfigError("empty dominance schedule");
        DominanceMode m = breakpoints_.front().second;
        for (const auto& [ts, mode] : breakpoints_)
            if (t >= ts) m = mode;
        return m;
    }

    /// "0:structural,0.8:dissipative"
    static DominanceSchedule parse(const std::string& text) {
        DominanceSchedule s;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw ConfigError("dominance entry '" + item + "' needs t:mode");
            double t = 0.0;
            try {
                t = std::stod(item.substr(0, colon));
            } catch (const std::exception&) {
                throw ConfigError("bad time in dominance entry '" + item + "'");
            }
            auto trim = [](std::string v) {
                const auto a = v.find_first_not_of(" \t");
                const auto b = v.find_last_not_of(" \t");
                return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
            };
            const auto m = parse_dominance(trim(item.substr(colon + 1)));
            if (!m) throw ConfigError("unknown dominance mode in '" + item + "'");
            s.add(t, *m);
        }
        if (s.empty()) throw ConfigError("empty dominance schedule");
        return s;
    }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < breakpoints_.size(); ++i)
            os << (i ? "," : "") << breakpoints_[i].first << ':' << to_string(breakpoints_[i].second);
        return os.str();
    }

    static DominanceSchedule from_labels(const Demonstration& demo) {
        DominanceSchedule s;
        for (const auto& l : demo.labels)
            if (s.empty() || s.breakpoints_.back().second != l.dominance) s.add(l.t0, l.dominance);
        return s;
    }

private:
    std::vector<std::pair<double, DominanceMode>> breakpoints_;
};

struct RecoveryOptions {
    double window_s = 0.1;
    double contact_threshold = 2.0;  // N
    FrameThresholds thresholds;
    MetricScale scale;
};

struct WindowRecovery {
    double t0 = 0.0;
    double t1 = 0.0;
    std::size_t begin = 0;  // sample range [begin, end)
    std::size_t end = 0;
    Twist mean_twist;
    Wrench mean_wrench;
    Pose ee_pose;  // at window start
    bool contact = false;
    std::optional<IntentEstimate> intent;
    std::optional<InteractionFrame> frame;
    bool degenerate_frame = false;
};

/// Non-overlapping windows of `window_s` (trailing partial window dropped).
inline std::vector<std::pair<std::size_t, std::size_t>> window_ranges(const Demonstration& demo, double window_s) {
    const long n = std::lround(window_s * demo.rate_hz);
    if (!(window_s >= 2.0 / demo.rate_hz - 1e-12) || n < 2)
        throw PreconditionViolation("window must span at least two samples");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto w = static_cast<std::size_t>(n);
    for (std::size_t b = 0; b + w <= demo.samples.size(); b += w) out.emplace_back(b, b + w);
    return out;
}

inline WindowRecovery summarize_window(const Demonstration& demo, std::size_t begin, std::size_t end) {
    WindowRecovery r;
    r.begin = begin;
    r.end = end;
    r.t0 = demo.samples[begin].t;
    r.t1 = end < demo.samples.size() ? demo.samples[end].t : demo.samples[end - 1].t + 1.0 / demo.rate_hz;
    r.ee_pose = demo.samples[begin].pose;
    for (std::size_t i = begin; i < end; ++i) {
        r.mean_twist += demo.samples[i].twist;
        r.mean_wrench += demo.samples[i].wrench;
    }
    const double inv = 1.0 / static_cast<double>(end - begin);
    r.mean_twist *= inv;
    r.mean_wrench *= inv;
    return r;
}

/// Per-window intent and frame, with the dominance mode taken from
/// `schedule` at each window's midpoint.
inline std::vector<WindowRecovery> recover_windows(const Demonstration& demo, const DominanceSchedule& schedule,
                                                   const RecoveryOptions& opt) {
    opt.thresholds.validate();
    std::vector<WindowRecovery> out;
    for (const auto& [b, e] : window_ranges(demo, opt.window_s)) {
        WindowRecovery r = summarize_window(demo, b, e);
        r.contact = r.mean_wrench.linear.norm() >= opt.contact_threshold;
        if (r.contact) {
            const DominanceMode mode = schedule.mode_at(0.5 * (r.t0 + r.t1));
            IntentEstimate intent = estimate_intent(r.mean_twist, r.mean_wrench, mode, opt.scale,
                                                    opt.thresholds.eps_xi, opt.thresholds.force_threshold);
            intent.t0 = r.t0;
            intent.t1 = r.t1;
            r.intent = intent;
            try {
                r.frame = construct_frame(intent, opt.thresholds, r.ee_pose, opt.scale);
            } catch (const DegenerateFrame&) {
                r.degenerate_frame = true;
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<WindowRecovery> recover_windows(const Demonstration& demo, DominanceMode mode,
                                                   const RecoveryOptions& opt) {
    return recover_windows(demo, DominanceSchedule(mode), opt);
}

enum class RecoveryStrategy { adaptive, wrench_only, twist_only };

inline constexpr std::string_view to_string(RecoveryStrategy s) {
    switch (s) {
        case RecoveryStrategy::adaptive: return "adaptive";
        case RecoveryStrategy::wrench_only: return "wrench_only";
        case RecoveryStrategy::twist_only: return "twist_only";
    }
    return "adaptive";
}

inline std::optional<RecoveryStrategy> parse_strategy(std::string_view s) {
    for (auto v : {RecoveryStrategy::adaptive, RecoveryStrategy::wrench_only, RecoveryStrategy::twist_only})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

/// wrench_only keeps the raw wrench as intent (structural everywhere);
/// twist_only always strips the wrench along the raw twist (dissipative
/// everywhere); adaptive follows the supplied per-segment schedule.
inline std::vector<WindowRecovery> recover_with_strategy(const Demonstration& demo, RecoveryStrategy strategy,
                                                         const DominanceSchedule* schedule,
                                                         const RecoveryOptions& opt) {
    switch (strategy) {
        case RecoveryStrategy::wrench_only: return recover_windows(demo, DominanceMode::structural, opt);
        case RecoveryStrategy::twist_only: return recover_windows(demo, DominanceMode::dissipative, opt);
        case RecoveryStrategy::adaptive:
            if (!schedule || schedule->empty())
                throw ConfigError("adaptive recovery requires a dominance schedule");
            return recover_windows(demo, *schedule, opt);
    }
    return {};
}

// Frame records: {"t0","t1","R":[9],"mode","fallback_used"}

inline void write_frames(const std::vector<WindowRecovery>& windows, std::ostream& out) {
    for (const auto& w : windows) {
        if (!w.frame) continue;
        nlohmann::json rec = {{"t0", w.t0},
                              {"t1", w.t1},
                              {"R", detail::rotation_json(w.frame->rotation)},
                              {"mode", std::string(to_string(w.intent->mode_used))},
                              {"fallback_used", w.frame->fallback_used}};
        out << rec.dump() << '\n';
    }
}

struct FrameRecord {
    double t0 = 0.0;
    double t1 = 0.0;
    Rotation rotation = Rotation::Identity();
    DominanceMode mode = DominanceMode::structural;
    bool fallback_used = false;
};

inline std::vector<FrameRecord> read_frames(std::istream& in) {
    std::vector<FrameRecord> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto rec = nlohmann::json::parse(text);
            FrameRecord f;
            f.t0 = rec.at("t0").get<double>();
            f.t1 = rec.at("t1").get<double>();
            f.rotation = detail::rotation_from(detail::json_numbers(rec, "R", 9, line));
            const auto m = parse_dominance(rec.at("mode").get<std::string>());
            if (!m) throw ParseError(line, "unknown mode");
            f.mode = *m;
            f.fallback_used = rec.at("fallback_used").get<bool>();
            if (!is_rotation(f.rotation, 1e-6)) throw ParseError(line, "R is not a rotation");
            out.push_back(f);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, e.what());
        }
    }
    return out;
}

}  // namespace forceframe
