#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace forceframe {

/// Which residual dominates the interaction power within a segment.
enum class DominanceMode { structural, dissipative };

enum class TaskMode { Free, Surface, Insertion, Rotation };

inline constexpr std::string_view to_string(DominanceMode m) {
    return m == DominanceMode::structural ? "structural" : "dissipative";
}

inline std::optional<DominanceMode> parse_dominance(std::string_view s) {
    if (s == "structural") return DominanceMode::structural;
    if (s == "dissipative") return DominanceMode::dissipative;
    return std::nullopt;
}

inline constexpr std::string_view to_string(TaskMode m) {
    switch (m) {
        case TaskMode::Free: return "Free";
        case TaskMode::Surface: return "Surface";
        case TaskMode::Insertion: return "Insertion";
        case TaskMode::Rotation: return "Rotation";
    }
    return "Free";
}

inline std::optional<TaskMode> parse_task_mode(std::string_view s) {
    for (auto m : {TaskMode::Free, TaskMode::Surface, TaskMode::Insertion, TaskMode::Rotation})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

/// Per-axis force/position selection in the interaction frame, ordered
/// (x, y, z translation; x, y, z rotation). true = force controlled.
using SelectionMask = std::array<bool, 6>;

inline bool any(const SelectionMask& s) {
    for (bool b : s)
        if (b) return true;
    return false;
}

}  // namespace forceframe
