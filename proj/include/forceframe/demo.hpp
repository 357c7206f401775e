#pragma once

// Demonstration data model, JSONL log ingestion, finite-difference twist
// estimation, and the synthetic demonstration generator.
//
// Log format (one JSON object per line):
//   header: {"schema": "forceframe-demo-v1", "rate_hz": 1000.0,
//            "wrench_convention": "robot_on_env" | "env_on_robot",
//            "labels": [{"t0", "t1", "R": [9], "mode", "dominance"}]}   (labels optional)
//   record: {"t": s, "pos": [3], "quat_wxyz": [4], "twist": [6], "wrench": [6]}

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forceframe/environment.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/modes.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

inline constexpr const char* kDemoSchema = "forceframe-demo-v1";

struct DemoSample {
    double t = 0.0;
    Pose pose;
    Twist twist;    // world frame
    Wrench wrench;  // robot-on-environment, world frame, gravity-compensated

    bool operator==(const DemoSample& o) const {
        return t == o.t && pose.position == o.pose.position &&
               pose.orientation.coeffs() == o.pose.orientation.coeffs() && twist == o.twist &&
               wrench == o.wrench;
    }
};

struct GroundTruthLabel {
    double t0 = 0.0;
    double t1 = 0.0;
    Rotation frame = Rotation::Identity();
    TaskMode mode = TaskMode::Free;
    DominanceMode dominance = DominanceMode::structural;
};

struct Demonstration {
    std::vector<DemoSample> samples;
    double rate_hz = 1000.0;
    std::vector<GroundTruthLabel> labels;

    std::size_t size() const { return samples.size(); }

    /// Label whose [t0, t1) contains t, if any.
    const GroundTruthLabel* label_at(double t) const {
        for (const auto& l : labels)
            if (t >= l.t0 && t < l.t1) return &l;
        if (!labels.empty() && t >= labels.back().t1) return &labels.back();
        return nullptr;
    }
};

enum class WrenchConvention { robot_on_env, env_on_robot };

namespace detail {

inline std::vector<double> json_numbers(const nlohmann::json& rec, const char* key, std::size_t n,
                                        std::size_t line) {
    if (!rec.contains(key)) throw ParseError(line, std::string("missing key '") + key + "'");
    const auto& arr = rec.at(key);
    if (!arr.is_array() || arr.size() != n)
        throw ParseError(line, std::string("'") + key + "' must be an array of " + std::to_string(n));
    std::vector<double> out;
    out.reserve(n);
    for (const auto& v : arr) {
        if (v.is_null()) throw NonFinite(line, std::string("null in '") + key + "'");
        if (!v.is_number()) throw ParseError(line, std::string("non-numeric entry in '") + key + "'");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw NonFinite(line, key);
        out.push_back(d);
    }
    return out;
}

inline nlohmann::json rotation_json(const Rotation& r) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a.push_back(r(i, j));
    return a;
}

inline Rotation rotation_from(const std::vector<double>& v) {
    Rotation r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = v[3 * i + j];
    return r;
}

}  // namespace detail

/// Parses a JSONL demonstration. Wrenches are negated when `negate_wrench`
/// is set or the header declares the env_on_robot convention.
inline Demonstration read_demo(std::istream& in, bool negate_wrench = false) {
    using nlohmann::json;
    Demonstration demo;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    bool negate = negate_wrench;

    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(line, e.what());
        }
        if (!rec.is_object()) throw ParseError(line, "record is not an object");

        if (!have_header) {
            if (!rec.contains("schema") || rec["schema"] != kDemoSchema)
                throw ParseError(line, std::string("expected header with schema ") + kDemoSchema);
            if (!rec.contains("rate_hz") || !rec["rate_hz"].is_number() || !(rec["rate_hz"].get<double>() > 0))
                throw ParseError(line, "header needs positive rate_hz");
            demo.rate_hz = rec["rate_hz"].get<double>();
            const std::string conv = rec.value("wrench_convention", std::string("robot_on_env"));
            if (conv == "env_on_robot")
                negate = true;
            else if (conv != "robot_on_env")
                throw ParseError(line, "unknown wrench_convention '" + conv + "'");
            if (rec.contains("labels")) {
                for (const auto& l : rec["labels"]) {
                    GroundTruthLabel g;
                    try {
                        g.t0 = l.at("t0").get<double>();
                        g.t1 = l.at("t1").get<double>();
                        g.frame = detail::rotation_from(detail::json_numbers(l, "R", 9, line));
                        const auto mode = parse_task_mode(l.at("mode").get<std::string>());
                        const auto dom = parse_dominance(l.at("dominance").get<std::string>());
                        if (!mode || !dom) throw ParseError(line, "bad label mode/dominance");
                        g.mode = *mode;
                        g.dominance = *dom;
                    } catch (const json::exception& e) {
                        throw ParseError(line, e.what());
                    }
                    demo.labels.push_back(g);
                }
            }
            have_header = true;
            continue;
        }

        DemoSample s;
        if (!rec.contains("t") || !(rec["t"].is_number() || rec["t"].is_null()))
            throw ParseError(line, "missing numeric 't'");
        if (rec["t"].is_null()) throw NonFinite(line, "t");
        s.t = rec["t"].get<double>();
        if (!std::isfinite(s.t)) throw NonFinite(line, "t");
        const auto pos = detail::json_numbers(rec, "pos", 3, line);
        const auto q = detail::json_numbers(rec, "quat_wxyz", 4, line);
        const auto tw = detail::json_numbers(rec, "twist", 6, line);
        const auto wr = detail::json_numbers(rec, "wrench", 6, line);
        s.pose.position = Vec3(pos[0], pos[1], pos[2]);
        s.pose.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        const double qn = s.pose.orientation.norm();
        if (std::abs(qn - 1.0) > 1e-6) throw ParseError(line, "quaternion is not unit norm");
        s.twist = Twist(Vec3(tw[0], tw[1], tw[2]), Vec3(tw[3], tw[4], tw[5]));
        s.wrench = Wrench(Vec3(wr[0], wr[1], wr[2]), Vec3(wr[3], wr[4], wr[5]));
        if (negate) s.wrench = -s.wrench;
        if (!demo.samples.empty() && !(s.t > demo.samples.back().t))
            throw NonMonotonicTime(line, "t must be strictly increasing");
        demo.samples.push_back(s);
    }
    if (!have_header) throw ParseError(line == 0 ? 1 : line, "empty log");
    if (demo.samples.size() < 2) throw ParseError(line, "a demonstration needs at least 2 samples");

    std::vector<double> dts;
    dts.reserve(demo.samples.size() - 1);
    for (std::size_t i = 1; i < demo.samples.size(); ++i) dts.push_back(demo.samples[i].t - demo.samples[i - 1].t);
    std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
    const double nominal = 1.0 / demo.rate_hz;
    if (std::abs(dts[dts.size() / 2] - nominal) > 0.1 * nominal)
        throw ParseError(1, "rate_hz inconsistent with timestamps by more than 10%");
    return demo;
}

inline Demonstration load_demo(const std::string& path, bool negate_wrench = false) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open " + path);
    return read_demo(in, negate_wrench);
}

inline void write_demo(const Demonstration& demo, std::ostream& out) {
    using nlohmann::json;
    json header = {{"schema", kDemoSchema}, {"rate_hz", demo.rate_hz}, {"wrench_convention", "robot_on_env"}};
    if (!demo.labels.empty()) {
        json labels = json::array();
        for (const auto& l : demo.labels)
            labels.push_back({{"t0", l.t0},
                              {"t1", l.t1},
                              {"R", detail::rotation_json(l.frame)},
                              {"mode", std::string(to_string(l.mode))},
                              {"dominance", std::string(to_string(l.dominance))}});
        header["labels"] = labels;
    }
    out << header.dump() << '\n';
    std::size_t line = 1;
    for (const auto& s : demo.samples) {
        ++line;
        if (!std::isfinite(s.t) || !s.pose.all_finite() || !s.twist.all_finite() || !s.wrench.all_finite())
            throw NonFinite(line, "refusing to write a non-finite sample");
        const auto& q = s.pose.orientation;
        json rec = {{"t", s.t},
                    {"pos", {s.pose.position.x(), s.pose.position.y(), s.pose.position.z()}},
                    {"quat_wxyz", {q.w(), q.x(), q.y(), q.z()}},
                    {"twist",
                     {s.twist.linear.x(), s.twist.linear.y(), s.twist.linear.z(), s.twist.angular.x(),
                      s.twist.angular.y(), s.twist.angular.z()}},
                    {"wrench",
                     {s.wrench.linear.x(), s.wrench.linear.y(), s.wrench.linear.z(), s.wrench.angular.x(),
                      s.wrench.angular.y(), s.wrench.angular.z()}}};
        out << rec.dump() << '\n';
    }
}

inline void save_demo(const Demonstration& demo, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_demo(demo, out);
}

/// Recomputes twists from poses: central differences inside, one-sided at
/// the ends. Angular velocity is world-frame, from log(R_next R_prev^T).
inline Demonstration estimate_twist(const Demonstration& demo) {
    const auto n = demo.samples.size();
    if (n < 3) throw PreconditionViolation("estimate_twist needs at least 3 samples");
    Demonstration out = demo;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
        const auto& a = demo.samples[lo];
        const auto& b = demo.samples[hi];
        const double dt = b.t - a.t;
        out.samples[i].twist.linear = (b.pose.position - a.pose.position) / dt;
        out.samples[i].twist.angular = log_so3(b.pose.rotation() * a.pose.rotation().transpose()) / dt;
    }
    return out;
}

/// Subtracts the mean wrench over a free-space window [t0, t1].
inline Demonstration remove_wrench_bias(const Demonstration& demo, double t0, double t1) {
    Wrench bias;
    std::size_t count = 0;
    for (const auto& s : demo.samples)
        if (s.t >= t0 && s.t <= t1) {
            bias += s.wrench;
            ++count;
        }
    if (count == 0) throw PreconditionViolation("bias window contains no samples");
    bias *= 1.0 / static_cast<double>(count);
    Demonstration out = demo;
    for (auto& s : out.samples) s.wrench = s.wrench - bias;
    return out;
}

// ---------------------------------------------------------------------------
// Synthesis

/// Constant-velocity piece of a motion script. Velocities are expressed in
/// the scenario's geometric frame.
struct ScriptSegment {
    double duration = 0.0;
    Vec3 linear_velocity = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();
    TaskMode mode = TaskMode::Free;
    DominanceMode dominance = DominanceMode::structural;
};

struct MotionScript {
    Vec3 start_position = Vec3::Zero();  // geometric frame
    Rotation start_orientation = Rotation::Identity();  // world frame
    std::vector<ScriptSegment> segments;
    double rate_hz = 1000.0;

    double duration() const {
        double d = 0.0;
        for (const auto& s : segments) d += s.duration;
        return d;
    }
};

struct NoiseModel {
    double wrench_sigma = 0.0;  // N, force channels
    double twist_sigma = 0.0;   // m/s, linear velocity channels
    double moment_sigma = -1.0;   // N m; negative means 0.02 m * wrench_sigma
    double angular_sigma = -1.0;  // rad/s; negative means 10 /m * twist_sigma

    double moment() const { return moment_sigma >= 0.0 ? moment_sigma : 0.02 * wrench_sigma; }
    double angular() const { return angular_sigma >= 0.0 ? angular_sigma : 10.0 * twist_sigma; }
};

/// Quasi-static kinematic replay of `script` against the scenario. The pose
/// follows the script exactly; the wrench is the elastic response plus
/// regularized Coulomb friction; i.i.d. Gaussian noise is added to twist and
/// wrench channels. One ground-truth label per script segment.
inline Demonstration synthesize_demo(const ContactScenario& scenario, const MotionScript& script,
                                     const NoiseModel& noise, std::uint64_t seed) {
    if (script.segments.empty()) throw InvalidScript("script has no segments");
    if (!(script.rate_hz > 0.0) || !std::isfinite(script.rate_hz)) throw InvalidScript("rate must be > 0");
    for (const auto& seg : script.segments)
        if (!(seg.duration > 0.0) || !std::isfinite(seg.duration) || !seg.linear_velocity.allFinite() ||
            !seg.angular_velocity.allFinite())
            throw InvalidScript("segment durations must be > 0 and velocities finite");
    if (noise.wrench_sigma < 0.0 || noise.twist_sigma < 0.0) throw InvalidScript("noise sigmas must be >= 0");

    const ContactEnvironment env(scenario, script.start_orientation);
    const Rotation& rg = scenario.ground_truth_frame;
    const double dt = 1.0 / script.rate_hz;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto noisy = [&](const Vec3& x, double sigma) {
        if (sigma == 0.0) return x;
        Vec3 n(unit(rng), unit(rng), unit(rng));
        return Vec3(x + sigma * n);
    };

    Demonstration demo;
    demo.rate_hz = script.rate_hz;

    // Segment k covers samples [start_k, start_{k+1}).
    std::vector<long> starts;
    double t_acc = 0.0;
    for (const auto& seg : script.segments) {
        starts.push_back(std::lround(t_acc * script.rate_hz));
        t_acc += seg.duration;
    }
    const long total = std::lround(t_acc * script.rate_hz);
    if (total < 2) throw InvalidScript("script shorter than two samples");

    Vec3 p = scenario.origin + rg * script.start_position;
    Rotation r = script.start_orientation;
    std::size_t seg_idx = 0;
    demo.samples.reserve(static_cast<std::size_t>(total));
    for (long k = 0; k < total; ++k) {
        while (seg_idx + 1 < script.segments.size() && k >= starts[seg_idx + 1]) ++seg_idx;
        const auto& seg = script.segments[seg_idx];
        const Twist cmd(rg * seg.linear_velocity, rg * seg.angular_velocity);

        DemoSample s;
        s.t = static_cast<double>(k) * dt;
        s.pose = Pose(r, p);
        const ContactResponse resp = env.respond(s.pose, cmd);
        s.twist = Twist(noisy(cmd.linear, noise.twist_sigma), noisy(cmd.angular, noise.angular()));
        s.wrench = Wrench(noisy(resp.total.linear, noise.wrench_sigma),
                          noisy(resp.total.angular, noise.moment()));
        demo.samples.push_back(s);

        p += cmd.linear * dt;
        r = exp_so3(cmd.angular * dt) * r;
    }

    for (std::size_t i = 0; i < script.segments.size(); ++i) {
        GroundTruthLabel l;
        l.t0 = static_cast<double>(starts[i]) * dt;
        l.t1 = i + 1 < script.segments.size() ? static_cast<double>(starts[i + 1]) * dt
                                               : static_cast<double>(total) * dt;
        l.frame = rg;
        l.mode = script.segments[i].mode;
        l.dominance = script.segments[i].dominance;
        demo.labels.push_back(l);
    }
    return demo;
}

}  // namespace forceframe
