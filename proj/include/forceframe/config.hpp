#pragma once

// INI configuration holding every tunable of the pipeline. Unknown sections
// or keys are rejected. See configs/default.ini for the documented defaults.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "forceframe/controller.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/metrics.hpp"
#include "forceframe/recovery.hpp"
#include "forceframe/scenarios.hpp"
#include "forceframe/scheduler.hpp"
#include "forceframe/task_structure.hpp"

namespace forceframe {

struct Config {
    MetricScale scale;
    RecoveryOptions recovery;
    std::string strategy = "adaptive";
    std::optional<std::string> dominance;
    LabelOptions label;
    ControllerGains gains;
    SchedulerConfig scheduler;
    SchedulerScript script;
    std::string scenario = "scrape";
    PresetParams preset;
    NoiseModel noise{0.5, 0.002, -1.0, -1.0};
    std::uint64_t seed = 1;
    RecoveryBenchmarkSpec bench;
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"metric", {"rho"}},
        {"recovery",
         {"window_s", "contact_threshold", "eps_xi", "eps_parallel", "force_threshold", "v_ref", "strategy",
          "dominance"}},
        {"classifier",
         {"contact_norm", "dominance_ratio", "omega_min", "fz_min", "insertion_policy", "reference_cutoff_hz"}},
        {"controller", {"kp_pos", "kf_force", "v_max", "dt"}},
        {"dtw", {"w_pos", "w_ori", "w_vel", "history_len", "chunk_prefix", "band"}},
        {"router", {"n_on", "n_off"}},
        {"scheduler",
         {"exec_rate_hz", "t_dtw", "blend_horizon", "duration", "latency", "period", "horizon", "source_rate_hz",
          "chunk_noise", "amplitude", "frequency", "advance", "contact_at", "local_period", "local_latency",
          "mode"}},
        {"scenario", {"name", "mu", "normal_force", "slide_speed", "stiffness", "frame_rpy_deg"}},
        {"noise", {"wrench_sigma", "twist_sigma", "moment_sigma", "angular_sigma", "seed"}},
        {"bench", {"seeds", "wrench_sigmas", "scenarios", "strategies", "failure_threshold_deg", "twist_sigma"}},
    };
    return schema;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

inline double to_number(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::vector<double> to_numbers(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_number(key, s));
    return out;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    const double d = to_number(key, v);
    if (d < 0 || d != std::floor(d)) throw ConfigError("'" + key + "' expects a non-negative integer");
    return static_cast<std::size_t>(d);
}

}  // namespace detail

/// Applies `key = value` pairs from an INI stream onto `cfg`.
inline void apply_config(std::istream& in, Config& cfg) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    const auto& schema = detail::config_schema();
    for (const auto& [section, body] : tree) {
        const auto it = schema.find(section);
        if (it == schema.end()) {
            if (body.empty()) throw ConfigError("config: top-level key '" + section + "' outside any section");
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, node] : body) {
            if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            const std::string v = node.get_value<std::string>();
            const std::string full = section + "." + key;
            auto num = [&] { return detail::to_number(full, v); };
            auto count = [&] { return detail::to_count(full, v); };

            if (section == "metric") {
                const double rho = num();
                if (!(rho > 0.0)) throw ConfigError("'" + full + "' must be > 0");
                cfg.scale = MetricScale(rho);
            } else if (section == "recovery") {
                auto& r = cfg.recovery;
                if (key == "window_s") r.window_s = num();
                else if (key == "contact_threshold") r.contact_threshold = num();
                else if (key == "eps_xi") r.thresholds.eps_xi = num();
                else if (key == "eps_parallel") r.thresholds.eps_parallel = num();
                else if (key == "force_threshold") r.thresholds.force_threshold = num();
                else if (key == "v_ref") {
                    const auto xs = detail::to_numbers(full, v);
                    if (xs.size() != 3) throw ConfigError("'" + full + "' expects three numbers");
                    r.thresholds.v_ref = Vec3(xs[0], xs[1], xs[2]);
                } else if (key == "strategy") {
                    if (!parse_strategy(v)) throw ConfigError("unknown strategy '" + v + "'");
                    cfg.strategy = v;
                } else if (key == "dominance") {
                    DominanceSchedule::parse(v);
                    cfg.dominance = v;
                }
            } else if (section == "classifier") {
                auto& c = cfg.label;
                if (key == "contact_norm") c.thresholds.contact_norm = num();
                else if (key == "dominance_ratio") c.thresholds.dominance_ratio = num();
                else if (key == "omega_min") c.thresholds.omega_min = num();
                else if (key == "fz_min") c.thresholds.fz_min = num();
                else if (key == "reference_cutoff_hz") c.reference_cutoff_hz = num();
                else if (key == "insertion_policy") {
                    const auto p = parse_insertion_policy(v);
                    if (!p) throw ConfigError("unknown insertion_policy '" + v + "'");
                    c.insertion_policy = *p;
                }
            } else if (section == "controller") {
                auto& g = cfg.gains;
                if (key == "kp_pos") g.kp_pos = num();
                else if (key == "kf_force") g.kf_force = num();
                else if (key == "v_max") g.v_max = num();
                else if (key == "dt") g.dt = num();
            } else if (section == "dtw") {
                auto& d = cfg.scheduler.dtw;
                if (key == "w_pos") d.w_pos = num();
                else if (key == "w_ori") d.w_ori = num();
                else if (key == "w_vel") d.w_vel = num();
                else if (key == "history_len") d.history_len = count();
                else if (key == "chunk_prefix") d.chunk_prefix = count();
                else if (key == "band") d.band = static_cast<int>(num());
            } else if (section == "router") {
                if (key == "n_on") cfg.scheduler.n_on = count();
                else cfg.scheduler.n_off = count();
            } else if (section == "scheduler") {
                auto& s = cfg.scheduler;
                auto& sc = cfg.script;
                if (key == "exec_rate_hz") s.exec_rate_hz = num();
                else if (key == "t_dtw") s.t_dtw = num();
                else if (key == "blend_horizon") s.blend_horizon = num();
                else if (key == "duration") s.duration = num();
                else if (key == "mode") {
                    if (v == "blended") s.mode = ExecutionMode::blended;
                    else if (v == "naive") s.mode = ExecutionMode::naive;
                    else throw ConfigError("unknown scheduler mode '" + v + "'");
                } else if (key == "latency") sc.latency = num();
                else if (key == "period") sc.period = num();
                else if (key == "horizon") sc.horizon = count();
                else if (key == "source_rate_hz") sc.source_rate_hz = num();
                else if (key == "chunk_noise") sc.chunk_noise = num();
                else if (key == "amplitude") sc.amplitude = num();
                else if (key == "frequency") sc.frequency = num();
                else if (key == "advance") sc.advance = num();
                else if (key == "contact_at") sc.contact_at = num();
                else if (key == "local_period") sc.local_period = num();
                else if (key == "local_latency") sc.local_latency = num();
            } else if (section == "scenario") {
                auto& p = cfg.preset;
                if (key == "name") cfg.scenario = v;
                else if (key == "mu") p.mu = num();
                else if (key == "normal_force") p.normal_force = num();
                else if (key == "slide_speed") p.slide_speed = num();
                else if (key == "stiffness") p.stiffness = num();
                else if (key == "frame_rpy_deg") {
                    const auto xs = detail::to_numbers(full, v);
                    if (xs.size() != 3) throw ConfigError("'" + full + "' expects three numbers");
                    p.frame = Rotation(rot_z(deg2rad(xs[2])) * rot_y(deg2rad(xs[1])) * rot_x(deg2rad(xs[0])));
                }
            } else if (section == "noise") {
                auto& n = cfg.noise;
                if (key == "wrench_sigma") n.wrench_sigma = num();
                else if (key == "twist_sigma") n.twist_sigma = num();
                else if (key == "moment_sigma") n.moment_sigma = num();
                else if (key == "angular_sigma") n.angular_sigma = num();
                else if (key == "seed") cfg.seed = count();
            } else if (section == "bench") {
                auto& b = cfg.bench;
                if (key == "seeds") b.seeds = count();
                else if (key == "wrench_sigmas") b.wrench_sigmas = detail::to_numbers(full, v);
                else if (key == "scenarios") b.scenarios = detail::split_list(v);
                else if (key == "failure_threshold_deg") b.failure_threshold_deg = num();
                else if (key == "twist_sigma") b.twist_sigma = num();
                else if (key == "strategies") {
                    b.strategies.clear();
                    for (const auto& s : detail::split_list(v)) {
                        const auto st = parse_strategy(s);
                        if (!st) throw ConfigError("unknown strategy '" + s + "'");
                        b.strategies.push_back(*st);
                    }
                }
            }
        }
    }
    cfg.recovery.scale = cfg.scale;
    cfg.bench.recovery = cfg.recovery;
    cfg.bench.params = cfg.preset;
    if (cfg.scenario.empty() || !make_preset(cfg.scenario, cfg.preset))
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
    try {
        cfg.recovery.thresholds.validate();
        cfg.label.thresholds.validate();
        cfg.gains.validate();
        cfg.scheduler.validate();
    } catch (const PreconditionViolation& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline Config load_config(const std::string& path) {
    Config cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    apply_config(in, cfg);
    return cfg;
}

/// Explicit path, else $FORCEFRAME_CONFIG, else built-in defaults.
inline Config resolve_config(const std::optional<std::string>& path) {
    if (path) return load_config(*path);
    if (const char* env = std::getenv("FORCEFRAME_CONFIG"); env && *env) return load_config(env);
    return Config{};
}

}  // namespace forceframe
