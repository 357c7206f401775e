#pragma once

// Single-binary command line: generate, recover, label, simulate, schedule, bench.
// Exit codes: 0 success, 1 analysis or data failure, 2 usage or config error.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forceframe/config.hpp"
#include "forceframe/controller.hpp"
#include "forceframe/demo.hpp"
#include "forceframe/metrics.hpp"
#include "forceframe/recovery.hpp"
#include "forceframe/scenarios.hpp"
#include "forceframe/scheduler.hpp"
#include "forceframe/task_structure.hpp"

namespace forceframe::cli {

/// "100ms", "0.1s" or a bare number of seconds.
inline double parse_duration(const std::string& text) {
    std::string num = text;
    double scale = 1.0;
    if (text.size() > 2 && text.ends_with("ms")) {
        num = text.substr(0, text.size() - 2);
        scale = 1e-3;
    } else if (text.size() > 1 && text.ends_with("s")) {
        num = text.substr(0, text.size() - 1);
    }
    const double v = detail::to_number("duration", num);
    if (v < 0.0) throw ConfigError("duration must be >= 0: '" + text + "'");
    return v * scale;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return in;
}

inline Demonstration load_demo_checked(const std::string& path, bool negate = false) {
    auto in = open_in(path);
    return read_demo(in, negate);
}

inline std::string mask_str(const SelectionMask& m) {
    std::string s;
    for (bool b : m) s += b ? '1' : '0';
    return s;
}

/// Windows of `demo` with frames taken from a frames file, matched by t0.
inline std::vector<WindowRecovery> windows_with_frames(const Demonstration& demo, const std::vector<FrameRecord>& frames,
                                                       const RecoveryOptions& opt) {
    std::vector<WindowRecovery> out;
    std::size_t next = 0;
    const double tol = 0.5 / demo.rate_hz;
    for (const auto& [b, e] : window_ranges(demo, opt.window_s)) {
        WindowRecovery w = summarize_window(demo, b, e);
        w.contact = w.mean_wrench.linear.norm() >= opt.contact_threshold;
        while (next < frames.size() && frames[next].t0 < w.t0 - tol) ++next;
        if (next < frames.size() && std::abs(frames[next].t0 - w.t0) <= tol) {
            InteractionFrame f;
            f.rotation = frames[next].rotation;
            f.origin = w.ee_pose.position;
            f.fallback_used = frames[next].fallback_used;
            w.frame = f;
            ++next;
        }
        out.push_back(std::move(w));
    }
    return out;
}

struct ScheduleSummary {
    std::size_t chunks = 0;
    std::size_t joins = 0;
    std::size_t switches = 0;
    double max_jump = 0.0;            // m
    double max_join_accel = 0.0;      // m/s^2, analytic
    double max_internal_accel = 0.0;  // m/s^2
    SmoothnessReport smooth;
};

inline ScheduleSummary summarize(const SchedulerResult& r) {
    ScheduleSummary s;
    for (const auto& e : r.events) {
        if (e.event == "chunk_arrival") ++s.chunks;
        if (e.event == "switch") ++s.switches;
    }
    s.joins = r.joins.size();
    for (const auto& j : r.joins) {
        s.max_jump = std::max(s.max_jump, j.jump);
        s.max_join_accel = std::max(s.max_join_accel, j.residual.acceleration);
    }
    s.max_internal_accel = r.max_internal_accel_residual;
    if (r.executed.size() >= 64) {
        s.smooth = smoothness(r.executed);
    } else {
        // too short for a spectrum; jerk is still defined
        s.smooth.sparc = std::numeric_limits<double>::quiet_NaN();
        if (r.executed.size() >= 4) {
            const auto j = jerk_stats(positions(r.executed), r.executed.rate_hz);
            s.smooth.max_jerk = j.max_jerk;
            s.smooth.rms_jerk = j.rms_jerk;
        }
    }
    return s;
}

}  // namespace detail

class Cli {
public:
    Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(std::vector<std::string> args) {
        CLI::App app{"forceframe: interaction-frame recovery, task structure and chunk scheduling"};
        app.require_subcommand(1);
        app.option_defaults()->always_capture_default();
        app.add_option("--config", config_path_, "INI config (default: $FORCEFRAME_CONFIG, else built-in)");

        std::function<int()> action;
        add_generate(app, action);
        add_recover(app, action);
        add_label(app, action);
        add_simulate(app, action);
        add_schedule(app, action);
        add_bench(app, action);

        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out_, err_);
            return code == 0 ? 0 : 2;
        }
        try {
            cfg_ = resolve_config(config_path_);
            return action();
        } catch (const ConfigError& e) {
            err_ << "error: " << e.what() << '\n';
            return 2;
        } catch (const Error& e) {
            err_ << "error: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << '\n';
            return 1;
        }
    }

private:
    // --- generate -----------------------------------------------------------
    struct GenerateArgs {
        std::optional<std::string> scenario;
        std::optional<std::uint64_t> seed;
        std::string out;
        std::optional<double> wrench_sigma, twist_sigma, mu, normal_force;
    } gen_;

    void add_generate(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("generate", "Synthesize a labelled demonstration log");
        c->add_option("--scenario", gen_.scenario, "scrape|press_slide|press|wall|free|peg|screw");
        c->add_option("--seed", gen_.seed);
        c->add_option("--out", gen_.out)->required();
        c->add_option("--wrench-sigma", gen_.wrench_sigma, "N");
        c->add_option("--twist-sigma", gen_.twist_sigma, "m/s");
        c->add_option("--mu", gen_.mu);
        c->add_option("--normal-force", gen_.normal_force, "N");
        c->callback([this, &action] { action = [this] { return generate(); }; });
    }

    int generate() {
        PresetParams params = cfg_.preset;
        if (gen_.mu) params.mu = gen_.mu;
        if (gen_.normal_force) params.normal_force = gen_.normal_force;
        const std::string name = gen_.scenario.value_or(cfg_.scenario);
        const auto preset = make_preset(name, params);
        if (!preset) throw ConfigError("unknown scenario '" + name + "'");
        NoiseModel noise = cfg_.noise;
        if (gen_.wrench_sigma) noise.wrench_sigma = *gen_.wrench_sigma;
        if (gen_.twist_sigma) noise.twist_sigma = *gen_.twist_sigma;
        const std::uint64_t seed = gen_.seed.value_or(cfg_.seed);
        const Demonstration demo = synthesize_demo(preset->scenario, preset->script, noise, seed);
        auto out = detail::open_out(gen_.out);
        write_demo(demo, out);

        out_ << "scenario " << name << ", seed " << seed << ", " << demo.size() << " samples at " << demo.rate_hz
             << " Hz -> " << gen_.out << '\n';
        out_ << std::fixed << std::setprecision(3);
        for (const auto& l : demo.labels)
            out_ << "  [" << l.t0 << ", " << l.t1 << ") " << to_string(l.mode) << " / " << to_string(l.dominance)
                 << '\n';
        return 0;
    }

    // --- recover ------------------------------------------------------------
    struct RecoverArgs {
        std::string demo;
        std::optional<std::string> strategy, dominance, out;
        bool from_labels = false;
        bool negate = false;
    } rec_;

    void add_recover(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("recover", "Recover interaction frames from a demonstration");
        c->add_option("--demo", rec_.demo)->required();
        c->add_option("--strategy", rec_.strategy, "adaptive|wrench_only|twist_only");
        c->add_option("--dominance", rec_.dominance, "schedule, e.g. 0:structural,0.8:dissipative");
        c->add_flag("--dominance-from-labels", rec_.from_labels, "take the schedule from the demo's labels");
        c->add_option("--out", rec_.out, "frames JSONL");
        c->add_flag("--negate-wrench", rec_.negate, "input wrench is environment-on-robot");
        c->callback([this, &action] { action = [this] { return recover(); }; });
    }

    int recover() {
        const std::string sname = rec_.strategy.value_or(cfg_.strategy);
        const auto strategy = parse_strategy(sname);
        if (!strategy) throw ConfigError("unknown strategy '" + sname + "'");
        const Demonstration demo = detail::load_demo_checked(rec_.demo, rec_.negate);

        std::optional<DominanceSchedule> schedule;
        if (rec_.dominance) schedule = DominanceSchedule::parse(*rec_.dominance);
        else if (rec_.from_labels) {
            if (demo.labels.empty()) throw ConfigError("--dominance-from-labels: demo has no labels");
            schedule = DominanceSchedule::from_labels(demo);
        } else if (cfg_.dominance) schedule = DominanceSchedule::parse(*cfg_.dominance);
        if (*strategy == RecoveryStrategy::adaptive && !schedule)
            throw ConfigError("adaptive strategy needs --dominance, --dominance-from-labels or [recovery] dominance");

        const auto windows = recover_with_strategy(demo, *strategy, schedule ? &*schedule : nullptr, cfg_.recovery);
        if (rec_.out) {
            auto out = detail::open_out(*rec_.out);
            write_frames(windows, out);
        }

        std::size_t contact = 0, frames = 0, fallback = 0, degenerate = 0;
        double max_power = 0.0;
        for (const auto& w : windows) {
            contact += w.contact;
            frames += w.frame.has_value();
            fallback += w.frame && w.frame->fallback_used;
            degenerate += w.degenerate_frame;
            if (w.intent) max_power = std::max(max_power, normalized_residual_power(*w.intent));
        }
        out_ << "strategy " << sname << ": " << windows.size() << " windows, " << contact << " in contact, " << frames
             << " frames (" << fallback << " fallback, " << degenerate << " degenerate)\n";
        out_ << "max normalized residual power " << std::scientific << std::setprecision(2) << max_power << '\n';
        if (!demo.labels.empty()) {
            const auto rep = make_error_report(window_errors(demo, windows), cfg_.bench.failure_threshold_deg);
            const auto fails = static_cast<std::size_t>(std::llround(rep.failure_rate * rep.errors.size()));
            out_ << std::fixed << std::setprecision(3) << "mean error " << rep.mean << " deg, max " << rep.max
                 << " deg, failures " << fails << "/" << rep.errors.size() << " above " << std::setprecision(1)
                 << rep.threshold << " deg" << (fails ? "  [FAILURE]" : "") << '\n';
        }
        return 0;
    }

    // --- label --------------------------------------------------------------
    struct LabelArgs {
        std::string demo, frames;
        std::optional<std::string> out;
    } lab_;

    void add_label(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("label", "Classify task modes and emit control structures");
        c->add_option("--demo", lab_.demo)->required();
        c->add_option("--frames", lab_.frames, "frames JSONL from recover")->required();
        c->add_option("--out", lab_.out, "labels JSONL");
        c->callback([this, &action] { action = [this] { return label(); }; });
    }

    int label() {
        const Demonstration demo = detail::load_demo_checked(lab_.demo);
        auto fin = detail::open_in(lab_.frames);
        const auto frames = read_frames(fin);
        const auto windows = detail::windows_with_frames(demo, frames, cfg_.recovery);
        const auto labels = label_demo(demo, windows, cfg_.label);
        if (lab_.out) {
            auto out = detail::open_out(*lab_.out);
            write_labels(labels, out);
        }
        std::map<std::string, std::size_t> counts;
        std::size_t low = 0;
        for (const auto& cs : labels) {
            ++counts[std::string(to_string(cs.mode))];
            low += cs.low_confidence;
        }
        out_ << labels.size() << " structures:";
        for (const auto& [m, n] : counts) out_ << ' ' << m << '=' << n;
        out_ << ", low confidence " << low << '\n';
        if (!demo.labels.empty())
            out_ << "accuracy " << std::fixed << std::setprecision(4) << label_accuracy(demo, labels) << '\n';
        return 0;
    }

    // --- simulate -----------------------------------------------------------
    struct SimulateArgs {
        std::string structure = "surface";
        double ref_fz = 10.0;
        double tilt_deg = 0.0;
        std::optional<std::string> duration;
        std::optional<std::string> labels, demo, scenario, out;
    } sim_;

    void add_simulate(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("simulate", "Closed-loop hybrid force/position episode");
        c->add_option("--structure", sim_.structure, "free|surface|insertion|rotation (spring-wall episode)");
        c->add_option("--ref-fz", sim_.ref_fz, "N");
        c->add_option("--tilt-deg", sim_.tilt_deg, "structure frame error about x");
        c->add_option("--duration", sim_.duration, "e.g. 4s");
        c->add_option("--labels", sim_.labels, "labels JSONL; replays --demo against --scenario");
        c->add_option("--demo", sim_.demo);
        c->add_option("--scenario", sim_.scenario);
        c->add_option("--out", sim_.out, "episode log (demo format)");
        c->callback([this, &action] { action = [this] { return simulate(); }; });
    }

    int simulate() {
        if (sim_.labels) return simulate_labels();
        static const std::map<std::string, TaskMode> modes = {{"free", TaskMode::Free},
                                                              {"surface", TaskMode::Surface},
                                                              {"insertion", TaskMode::Insertion},
                                                              {"rotation", TaskMode::Rotation}};
        const auto it = modes.find(sim_.structure);
        if (it == modes.end()) throw ConfigError("unknown structure '" + sim_.structure + "'");
        ForceRegulationSpec spec;
        spec.structure = it->second;
        spec.ref_fz = sim_.ref_fz;
        spec.tilt_deg = sim_.tilt_deg;
        spec.gains = cfg_.gains;
        if (sim_.duration) spec.duration = parse_duration(*sim_.duration);
        const auto r = run_force_regulation(spec, cfg_.scale);
        if (sim_.out) {
            auto out = detail::open_out(*sim_.out);
            write_demo(r.episode.log, out);
        }
        out_ << std::fixed << std::setprecision(3) << "structure " << sim_.structure << ", tilt " << spec.tilt_deg
             << " deg, ref f_z " << spec.ref_fz << " N\n";
        out_ << "steady f_z " << r.steady_force << " N, error " << 100.0 * r.steady_error << "%\n";
        if (std::isfinite(r.settling_time)) out_ << "settled (" << 100.0 * spec.settle_band << "%) at " << r.settling_time << " s\n";
        else out_ << "did not settle within " << 100.0 * spec.settle_band << "%\n";
        out_ << "max tangential error " << 1e3 * r.max_tangential_error << " mm\n";
        return 0;
    }

    int simulate_labels() {
        if (!sim_.demo) throw ConfigError("--labels needs --demo for the motion targets");
        const std::string name = sim_.scenario.value_or(cfg_.scenario);
        const auto preset = make_preset(name, cfg_.preset);
        if (!preset) throw ConfigError("unknown scenario '" + name + "'");
        auto lin = detail::open_in(*sim_.labels);
        const auto structures = read_labels(lin);
        if (structures.empty()) throw ConfigError("labels file is empty");
        const Demonstration demo = detail::load_demo_checked(*sim_.demo);
        if (demo.samples.empty()) throw ConfigError("demo has no samples");

        const ContactEnvironment env(preset->scenario, preset->script.start_orientation);
        const auto& samples = demo.samples;
        const TargetFn targets = [&samples](double t) {
            auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                       [](const DemoSample& s, double tv) { return s.t < tv; });
            if (it == samples.end()) --it;
            return Target{it->pose, it->twist};
        };
        const double duration =
            sim_.duration ? parse_duration(*sim_.duration) : samples.back().t - samples.front().t;
        SimState s0 = initial_state(samples.front().pose, env);
        s0.t = samples.front().t;
        const Episode ep = run_episode(s0, structures, targets, env, cfg_.gains, duration, cfg_.scale);
        if (sim_.out) {
            auto out = detail::open_out(*sim_.out);
            write_demo(ep.log, out);
        }
        double sum = 0.0, worst = 0.0;
        std::size_t n = 0;
        for (const auto& st : ep.states) {
            const auto& cs = structure_at(structures, st.t);
            const Vec3 f = cs.frame.transpose() * st.measured_wrench.linear;
            for (int i = 0; i < 3; ++i)
                if (cs.mask[i] && cs.ref_valid[i]) {
                    const double e = std::abs(f(i) - cs.ref(i));
                    sum += e;
                    worst = std::max(worst, e);
                    ++n;
                }
        }
        out_ << std::fixed << std::setprecision(3) << "replayed " << structures.size() << " structures on " << name
             << " over " << duration << " s\n";
        if (n) out_ << "force error on masked axes: mean " << sum / n << " N, max " << worst << " N\n";
        else out_ << "no force-controlled axes\n";
        return 0;
    }

    // --- schedule -----------------------------------------------------------
    struct ScheduleArgs {
        std::optional<std::string> latency, period, duration, contact_at;
        std::string clock = "virtual";
        std::optional<std::string> mode;
        std::optional<double> chunk_noise;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out_events, out_traj;
    } sch_;

    void add_schedule(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("schedule", "Run the asynchronous chunk scheduler");
        c->add_option("--latency", sch_.latency, "inference latency, e.g. 100ms");
        c->add_option("--period", sch_.period, "launch period, e.g. 100ms");
        c->add_option("--duration", sch_.duration, "episode length, e.g. 5s");
        c->add_option("--contact-at", sch_.contact_at, "add a local policy whose mask turns on here");
        c->add_option("--clock", sch_.clock, "virtual|realtime")->check(CLI::IsMember({"virtual", "realtime"}));
        c->add_option("--mode", sch_.mode, "blended|naive")->check(CLI::IsMember({"blended", "naive"}));
        c->add_option("--chunk-noise", sch_.chunk_noise, "m");
        c->add_option("--seed", sch_.seed);
        c->add_option("--out-events", sch_.out_events, "event log JSONL");
        c->add_option("--out-traj", sch_.out_traj, "executed trajectory (demo format)");
        c->callback([this, &action] { action = [this] { return schedule(); }; });
    }

    int schedule() {
        SchedulerScript script = cfg_.script;
        SchedulerConfig sc = cfg_.scheduler;
        if (sch_.latency) script.latency = parse_duration(*sch_.latency);
        if (sch_.period) script.period = parse_duration(*sch_.period);
        if (sch_.contact_at) script.contact_at = parse_duration(*sch_.contact_at);
        if (sch_.chunk_noise) script.chunk_noise = *sch_.chunk_noise;
        if (sch_.duration) sc.duration = parse_duration(*sch_.duration);
        if (sch_.mode) sc.mode = *sch_.mode == "naive" ? ExecutionMode::naive : ExecutionMode::blended;
        sc.clock = sch_.clock == "realtime" ? ClockMode::realtime : ClockMode::virtual_clock;
        sc.seed = sch_.seed.value_or(cfg_.seed);
        const auto sources = make_sources(script);
        sc.initial = sources.front().target(0.0);

        const SchedulerResult r = run_scheduler(sources, sc);
        if (sch_.out_events) {
            auto out = detail::open_out(*sch_.out_events);
            write_events(r.events, out);
        }
        if (sch_.out_traj) {
            auto out = detail::open_out(*sch_.out_traj);
            write_demo(r.executed, out);
        }
        const auto s = detail::summarize(r);
        out_ << std::fixed << std::setprecision(3) << (sc.mode == ExecutionMode::naive ? "naive" : "blended")
             << " execution, latency " << 1e3 * script.latency << " ms, period " << 1e3 * script.period << " ms, "
             << (sc.clock == ClockMode::realtime ? "realtime" : "virtual") << " clock\n";
        out_ << s.chunks << " chunks, " << s.joins << " joins, " << s.switches << " authority switches\n";
        out_ << "max join jump " << 1e3 * s.max_jump << " mm, max join accel residual " << std::scientific
             << std::setprecision(2) << s.max_join_accel << " m/s^2\n";
        out_ << std::fixed << std::setprecision(3) << "max jerk " << s.smooth.max_jerk << " m/s^3, SPARC ";
        if (std::isnan(s.smooth.sparc)) out_ << "n/a (fewer than 64 samples)\n";
        else out_ << s.smooth.sparc << '\n';
        for (const auto& d : r.diagnostics) out_ << "note: " << d << '\n';
        return 0;
    }

    // --- bench --------------------------------------------------------------
    struct BenchArgs {
        std::string suite = "recovery";
        std::optional<std::size_t> seeds;
        std::optional<std::string> out;
    } ben_;

    void add_bench(CLI::App& app, std::function<int()>& action) {
        auto* c = app.add_subcommand("bench", "Benchmark tables as CSV");
        c->add_option("--suite", ben_.suite, "recovery|scheduler")->check(CLI::IsMember({"recovery", "scheduler"}));
        c->add_option("--seeds", ben_.seeds);
        c->add_option("--out", ben_.out, "CSV path (default: stdout)");
        c->callback([this, &action] { action = [this] { return bench(); }; });
    }

    int bench() {
        std::ostringstream csv;
        if (ben_.suite == "recovery") {
            RecoveryBenchmarkSpec spec = cfg_.bench;
            if (ben_.seeds) spec.seeds = *ben_.seeds;
            const auto cells = recovery_benchmark(spec);
            write_benchmark_csv(cells, csv);
        } else {
            csv << "mode,latency_s,period_s,max_jerk,rms_jerk,sparc,max_jump_mm,max_join_accel\n";
            csv << std::setprecision(6);
            const std::size_t seeds = ben_.seeds.value_or(1);
            for (double latency : {0.05, 0.1, 0.15}) {
                for (const auto mode : {ExecutionMode::blended, ExecutionMode::naive}) {
                    double mj = 0, rj = 0, sp = 0, jump = 0, acc = 0;
                    for (std::size_t k = 0; k < seeds; ++k) {
                        SchedulerScript script = cfg_.script;
                        script.latency = latency;
                        SchedulerConfig sc = cfg_.scheduler;
                        sc.mode = mode;
                        sc.seed = cfg_.seed + k;
                        const auto sources = make_sources(script);
                        sc.initial = sources.front().target(0.0);
                        const auto s = detail::summarize(run_scheduler(sources, sc));
                        mj += s.smooth.max_jerk;
                        rj += s.smooth.rms_jerk;
                        sp += s.smooth.sparc;
                        jump = std::max(jump, s.max_jump);
                        acc = std::max(acc, s.max_join_accel);
                    }
                    const double n = static_cast<double>(seeds);
                    csv << (mode == ExecutionMode::naive ? "naive" : "blended") << ',' << latency << ','
                        << cfg_.script.period << ',' << mj / n << ',' << rj / n << ',' << sp / n << ',' << 1e3 * jump
                        << ',' << acc << '\n';
                }
            }
        }
        if (ben_.out) {
            auto out = detail::open_out(*ben_.out);
            out << csv.str();
            out_ << "wrote " << *ben_.out << '\n';
        } else {
            out_ << csv.str();
        }
        return 0;
    }

    std::ostream& out_;
    std::ostream& err_;
    std::optional<std::string> config_path_;
    Config cfg_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Cli cli(out, err);
    return cli.run(args);
}

}  // namespace forceframe::cli
