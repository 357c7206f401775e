#pragma once

// Named synthetic scenarios: a contact model plus the motion script that
// exercises it. Used by the generator CLI, the benchmarks and the tests.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forceframe/contact_models.hpp"
#include "forceframe/demo.hpp"

namespace forceframe {

struct ScenarioPreset {
    std::string name;
    ContactScenario scenario;
    MotionScript script;
};

/// Knobs the config file may override on a preset.
struct PresetParams {
    std::optional<double> mu;
    std::optional<double> normal_force;  // N, target contact load
    std::optional<double> slide_speed;   // m/s
    std::optional<double> stiffness;     // N/m (wall / patch normal equivalent)
    std::optional<Rotation> frame;
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"scrape", "press_slide", "press", "wall",
                                                   "free",   "peg",         "screw"};
    return names;
}

inline std::optional<ScenarioPreset> make_preset(std::string_view name, const PresetParams& p = {}) {
    using DM = DominanceMode;
    using TM = TaskMode;
    ScenarioPreset out;
    out.name = std::string(name);
    auto& sc = out.scenario;
    auto& script = out.script;

    if (name == "scrape") {
        // Already in contact, sliding for the whole log.
        sc.kind = ContactKind::winkler_patch;
        sc.a = 0.02;
        sc.b = 0.01;
        sc.k_n = 1e8;
        sc.mu = p.mu.value_or(0.5);
        if (p.stiffness) sc.k_n = *p.stiffness / (std::numbers::pi * sc.a * sc.b);
        const double k_zz = sc.k_n * std::numbers::pi * sc.a * sc.b;
        const double depth = p.normal_force.value_or(10.0) / k_zz;
        script.start_position = Vec3(0, 0, depth);
        script.segments = {{2.0, Vec3(p.slide_speed.value_or(0.05), 0, 0), Vec3::Zero(), TM::Surface, DM::dissipative}};
    } else if (name == "press_slide") {
        // Approach, compliant press with visible creep, hold, then slide.
        sc.kind = ContactKind::spring_wall;
        sc.wall_stiffness = p.stiffness.value_or(2000.0);
        sc.mu = p.mu.value_or(0.5);
        const double depth = p.normal_force.value_or(20.0) / sc.wall_stiffness;
        script.start_position = Vec3(0, 0, -0.005);
        script.segments = {
            {0.2, Vec3(0, 0, 0.025), Vec3::Zero(), TM::Free, DM::structural},
            {0.4, Vec3(0, 0, depth / 0.4), Vec3::Zero(), TM::Surface, DM::structural},
            {0.2, Vec3::Zero(), Vec3::Zero(), TM::Surface, DM::structural},
            {1.0, Vec3(p.slide_speed.value_or(0.05), 0, 0), Vec3::Zero(), TM::Surface, DM::dissipative},
        };
    } else if (name == "press" || name == "wall") {
        const bool wall = name == "wall";
        sc.kind = wall ? ContactKind::spring_wall : ContactKind::winkler_patch;
        sc.wall_stiffness = p.stiffness.value_or(1e4);
        sc.k_n = 1e8;
        if (!wall && p.stiffness) sc.k_n = *p.stiffness / (std::numbers::pi * sc.a * sc.b);
        sc.mu = p.mu.value_or(0.5);
        const double k = wall ? sc.wall_stiffness : sc.k_n * std::numbers::pi * sc.a * sc.b;
        const double depth = p.normal_force.value_or(20.0) / k;
        script.start_position = Vec3(0, 0, -0.002);
        script.segments = {
            {0.2, Vec3(0, 0, 0.01), Vec3::Zero(), TM::Free, DM::structural},
            {0.4, Vec3(0, 0, depth / 0.4), Vec3::Zero(), TM::Surface, DM::structural},
            {0.4, Vec3::Zero(), Vec3::Zero(), TM::Surface, DM::structural},
        };
    } else if (name == "free") {
        sc.kind = ContactKind::spring_wall;
        script.start_position = Vec3(0, 0, -0.05);
        script.segments = {
            {0.5, Vec3(p.slide_speed.value_or(0.05), 0, 0), Vec3::Zero(), TM::Free, DM::dissipative},
            {0.5, Vec3(0, 0.03, 0.01), Vec3::Zero(), TM::Free, DM::dissipative},
        };
    } else if (name == "peg") {
        // Tight-fit peg pushed along the channel axis x, pressed against one
        // side wall along z.
        sc.kind = ContactKind::peg_channel;
        sc.channel_stiffness = p.stiffness.value_or(1e4);
        sc.mu = p.mu.value_or(0.5);
        sc.preload = 20.0;
        const double lateral = p.normal_force.value_or(2.0) / sc.channel_stiffness;
        script.start_position = Vec3(0, 0, lateral);
        script.segments = {{1.0, Vec3(p.slide_speed.value_or(0.01), 0, 0), Vec3::Zero(), TM::Insertion,
                            DM::dissipative}};
    } else if (name == "screw") {
        sc.kind = ContactKind::screw;
        sc.a = 0.004;
        sc.wall_stiffness = p.stiffness.value_or(1e5);
        sc.mu = p.mu.value_or(0.3);
        const double depth = p.normal_force.value_or(10.0) / sc.wall_stiffness;
        script.start_position = Vec3(0, 0, depth);
        script.segments = {{1.0, Vec3::Zero(), Vec3(0, 0, 1.0), TM::Rotation, DM::dissipative}};
    } else {
        return std::nullopt;
    }
    if (p.frame) sc.ground_truth_frame = *p.frame;
    return out;
}

}  // namespace forceframe
