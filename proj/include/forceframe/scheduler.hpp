#pragma once

// Dual-source asynchronous chunk scheduler: unified-rate resampling, DTW
// entry-index alignment against execution history, latency compensation,
// quintic blending, and hysteresis routing between a global and a local
// policy source.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "forceframe/demo.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/modes.hpp"
#include "forceframe/spatial.hpp"
#include "forceframe/trajectory.hpp"

namespace forceframe {

enum class PolicyKind { global, local };

inline constexpr std::string_view to_string(PolicyKind k) { return k == PolicyKind::global ? "global" : "local"; }

struct ChunkSample {
    double t = 0.0;
    Pose pose;
};

struct ActionChunk {
    std::vector<ChunkSample> samples;
    PolicyKind source = PolicyKind::global;
    double issued_at = 0.0;
    std::optional<SelectionMask> mask;
    std::optional<Vec6> ref_wrench;

    std::size_t size() const { return samples.size(); }

    void validate() const {
        if (samples.size() < 2) throw PreconditionViolation("chunk needs at least two samples");
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (!(samples[i].t > samples[i - 1].t)) throw PreconditionViolation("chunk times must increase");
    }
};

/// Uniform grid t0 + k/rate over the chunk's span; position lerp, orientation
/// slerp. The chunk end is appended when the grid does not land on it.
inline ActionChunk resample_chunk(const ActionChunk& chunk, double rate_hz) {
    chunk.validate();
    if (!(rate_hz > 0.0)) throw PreconditionViolation("rate must be > 0");
    ActionChunk out = chunk;
    out.samples.clear();
    const double t0 = chunk.samples.front().t;
    const double t1 = chunk.samples.back().t;
    const double tol = 1e-9;
    std::size_t seg = 0;
    for (long k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) / rate_hz;
        if (t > t1 + tol) break;
        while (seg + 2 < chunk.samples.size() && t > chunk.samples[seg + 1].t) ++seg;
        const auto& a = chunk.samples[seg];
        const auto& b = chunk.samples[seg + 1];
        const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
        ChunkSample s;
        s.t = t;
        s.pose.position = (1.0 - u) * a.pose.position + u * b.pose.position;
        s.pose.orientation = a.pose.orientation.slerp(u, b.pose.orientation).normalized();
        out.samples.push_back(s);
    }
    if (out.samples.back().t < t1 - tol) out.samples.push_back(chunk.samples.back());
    return out;
}

struct DtwConfig {
    double w_pos = 1.0;
    double w_ori = 0.5;
    double w_vel = 0.1;
    std::size_t history_len = 25;   // M
    std::size_t chunk_prefix = 50;  // N_p
    int band = 10;                  // Sakoe-Chiba half-width; negative disables

    void validate() const {
        if (w_pos < 0 || w_ori < 0 || w_vel < 0 || (w_pos == 0 && w_ori == 0 && w_vel == 0))
            throw PreconditionViolation("DTW weights must be >= 0 and not all zero");
        if (history_len < 2 || chunk_prefix < 2) throw PreconditionViolation("M and N_p must be >= 2");
    }
};

namespace detail {

inline std::vector<Vec3> backward_velocities(const std::vector<ChunkSample>& s) {
    std::vector<Vec3> v(s.size(), Vec3::Zero());
    if (s.size() < 2) return v;
    v[0] = (s[1].pose.position - s[0].pose.position) / (s[1].t - s[0].t);
    for (std::size_t i = 1; i < s.size(); ++i)
        v[i] = (s[i].pose.position - s[i - 1].pose.position) / (s[i].t - s[i - 1].t);
    return v;
}

}  // namespace detail

/// Frame-wise alignment costs, rows = predicted prefix, columns = history
/// (oldest first, last column is the current state h_0).
inline Eigen::MatrixXd dtw_cost_matrix(const std::vector<ChunkSample>& pred, const std::vector<ChunkSample>& hist,
                                       const DtwConfig& cfg) {
    const auto vp = detail::backward_velocities(pred);
    const auto vh = detail::backward_velocities(hist);
    Eigen::MatrixXd c(pred.size(), hist.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Rotation rp = pred[i].pose.rotation();
        for (std::size_t j = 0; j < hist.size(); ++j) {
            c(i, j) = cfg.w_pos * (pred[i].pose.position - hist[j].pose.position).norm() +
                      cfg.w_ori * geodesic_angle(rp, hist[j].pose.rotation()) + cfg.w_vel * (vp[i] - vh[j]).norm();
        }
    }
    return c;
}

struct DtwResult {
    std::size_t k_star = 0;
    double cost = 0.0;
    std::size_t start_column = 0;                            // history index matched to pred[0]
    std::vector<std::pair<std::size_t, std::size_t>> path;   // (pred, hist), start to end
};

/// Best warping path that begins with pred[0] against any history sample and
/// ends on the last history column. The band bounds |i - (j - j0)| relative
/// to the path's own start column j0. Ties go to the smallest end row.
inline DtwResult dtw_on_costs(const Eigen::MatrixXd& c, int band) {
    const auto n = static_cast<std::size_t>(c.rows());
    const auto m = static_cast<std::size_t>(c.cols());
    if (n == 0 || m == 0) throw PreconditionViolation("empty cost matrix");
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto inside = [band](std::size_t i, std::size_t j, std::size_t j0) {
        if (band < 0) return true;
        const long d = static_cast<long>(i) - (static_cast<long>(j) - static_cast<long>(j0));
        return std::abs(d) <= band;
    };
    // d[j0][i][j], j >= j0
    std::vector<double> d(m * n * m, inf);
    auto at = [&](std::size_t j0, std::size_t i, std::size_t j) -> double& { return d[(j0 * n + i) * m + j]; };

    DtwResult best;
    best.cost = inf;
    for (std::size_t j0 = 0; j0 < m; ++j0) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = j0; j < m; ++j) {
                if (!inside(i, j, j0)) continue;
                double prev;
                if (i == 0 && j == j0) {
                    prev = 0.0;
                } else {
                    prev = inf;
                    if (i > 0) prev = std::min(prev, at(j0, i - 1, j));
                    if (j > j0) prev = std::min(prev, at(j0, i, j - 1));
                    if (i > 0 && j > j0) prev = std::min(prev, at(j0, i - 1, j - 1));
                    if (prev == inf) continue;
                }
                at(j0, i, j) = prev + c(i, j);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double v = at(j0, i, m - 1);
            if (v < best.cost || (v == best.cost && i < best.k_star)) {
                best.cost = v;
                best.k_star = i;
                best.start_column = j0;
            }
        }
    }
    if (best.cost == inf) throw PreconditionViolation("no admissible warping path under the band");

    // Backtrack along the cheapest predecessor, diagonal first on ties.
    std::size_t i = best.k_star, j = m - 1;
    const std::size_t j0 = best.start_column;
    best.path.emplace_back(i, j);
    while (!(i == 0 && j == j0)) {
        const double diag = (i > 0 && j > j0) ? at(j0, i - 1, j - 1) : inf;
        const double up = i > 0 ? at(j0, i - 1, j) : inf;
        const double left = j > j0 ? at(j0, i, j - 1) : inf;
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        best.path.emplace_back(i, j);
    }
    std::reverse(best.path.begin(), best.path.end());
    return best;
}

/// k*: the predicted index aligned with the current state h_0 = hist.back().
inline DtwResult dtw_entry_index(const ActionChunk& pred, const std::vector<ChunkSample>& hist, const DtwConfig& cfg) {
    cfg.validate();
    if (hist.size() < 2) throw EmptyHistory("DTW needs at least two history samples");
    if (pred.samples.empty()) throw PreconditionViolation("empty predicted chunk");
    const std::size_t np = std::min(cfg.chunk_prefix, pred.samples.size());
    const std::size_t mh = std::min(cfg.history_len, hist.size());
    const std::vector<ChunkSample> p(pred.samples.begin(), pred.samples.begin() + static_cast<long>(np));
    const std::vector<ChunkSample> h(hist.end() - static_cast<long>(mh), hist.end());
    return dtw_on_costs(dtw_cost_matrix(p, h, cfg), cfg.band);
}

/// k* + ceil(t_dtw / dt), clamped so at least two waypoints remain.
inline std::size_t compensate_latency(std::size_t k_star, double t_dtw, double dt, std::size_t chunk_len) {
    if (!(t_dtw >= 0.0) || !(dt > 0.0)) throw PreconditionViolation("t_dtw >= 0 and dt > 0 required");
    if (chunk_len < 2 || k_star > chunk_len - 2) throw ChunkExhausted("fewer than two waypoints remain after k*");
    const auto extra = static_cast<std::size_t>(std::ceil(t_dtw / dt - 1e-9));
    return std::min(k_star + extra, chunk_len - 2);
}

struct RouterState {
    PolicyKind authority = PolicyKind::global;
    std::size_t consecutive_contact = 0;
    std::size_t consecutive_free = 0;
    std::size_t n_on = 3;
    std::size_t n_off = 5;
};

inline RouterState route(RouterState s, const SelectionMask& local_mask) {
    if (any(local_mask)) {
        ++s.consecutive_contact;
        s.consecutive_free = 0;
        if (s.authority == PolicyKind::global && s.consecutive_contact >= s.n_on) s.authority = PolicyKind::local;
    } else {
        ++s.consecutive_free;
        s.consecutive_contact = 0;
        if (s.authority == PolicyKind::local && s.consecutive_free >= s.n_off) s.authority = PolicyKind::global;
    }
    return s;
}

/// Scripted policy stand-in. With phase tracking the source locates the
/// observed pose on its target path (nearest point, searched forward from the
/// previous estimate) and predicts the path onward from there, so a chunk
/// starts where the robot was when it was observed and goes stale by the
/// inference latency. Without it the chunk is the script sampled from t_obs.
struct PolicySource {
    PolicyKind kind = PolicyKind::global;
    double period = 0.1;      // s between inference launches
    double latency = 0.1;     // s from launch to delivery
    double rate_hz = 50.0;    // native waypoint rate
    std::size_t horizon = 50; // waypoints per chunk
    double start = 0.0;       // first launch time
    double chunk_noise = 0.0; // m, per-chunk constant position offset (1 sigma)
    bool track_phase = true;
    double phase_search = 0.5;  // s of path searched ahead of the last phase
    std::function<Pose(double)> target;
    std::function<SelectionMask(double)> mask;  // local sources

    void validate() const {
        if (!(period > 0.0) || !(latency >= 0.0) || !(rate_hz > 0.0) || horizon < 2 || !(phase_search > 0.0))
            throw PreconditionViolation("policy source needs period > 0, latency >= 0, rate > 0, horizon >= 2");
        if (!target) throw PreconditionViolation("policy source has no target script");
    }

    double path_distance(double phase, const Pose& obs, double rho) const {
        const Pose p = target(phase);
        return (p.position - obs.position).norm() + rho * geodesic_angle(p.rotation(), obs.rotation());
    }

    /// Nearest path phase in [lo, lo + phase_search]: 1 ms grid, then golden section.
    double estimate_phase(const Pose& obs, double lo, double rho = 0.1) const {
        const double step = 1e-3;
        const auto n = static_cast<long>(std::ceil(phase_search / step));
        double best = lo, best_d = path_distance(lo, obs, rho);
        for (long k = 1; k <= n; ++k) {
            const double ph = lo + static_cast<double>(k) * step;
            const double d = path_distance(ph, obs, rho);
            if (d < best_d) {
                best_d = d;
                best = ph;
            }
        }
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = std::max(lo, best - step), b = best + step;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = path_distance(c, obs, rho), fd = path_distance(d, obs, rho);
        for (int it = 0; it < 60; ++it) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = path_distance(c, obs, rho);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = path_distance(d, obs, rho);
            }
        }
        const double refined = 0.5 * (a + b);
        return path_distance(refined, obs, rho) <= best_d ? refined : best;
    }

    /// `phase` carries the source's last path estimate between calls.
    ActionChunk make_chunk(double t_obs, const Pose& observed, std::mt19937_64& rng, double& phase) const {
        ActionChunk c;
        c.source = kind;
        c.issued_at = t_obs;
        Vec3 offset = Vec3::Zero();
        if (chunk_noise > 0.0) {
            std::normal_distribution<double> n(0.0, chunk_noise);
            offset = Vec3(n(rng), n(rng), n(rng));
        }
        double ph0 = t_obs;
        Rotation align = Rotation::Identity();
        Vec3 shift = Vec3::Zero();
        if (track_phase) {
            ph0 = estimate_phase(observed, phase);
            phase = ph0;
            const Pose ref = target(ph0);
            align = observed.rotation() * ref.rotation().transpose();
            shift = observed.position - ref.position;
        }
        for (std::size_t i = 0; i < horizon; ++i) {
            const double dt = static_cast<double>(i) / rate_hz;
            const Pose tp = target(ph0 + dt);
            ChunkSample s;
            s.t = t_obs + dt;
            s.pose = Pose(align * tp.rotation(), tp.position + shift + offset);
            c.samples.push_back(s);
        }
        if (mask) c.mask = mask(t_obs);
        return c;
    }
};

enum class ExecutionMode { blended, naive };
enum class ClockMode { virtual_clock, realtime };

struct SchedulerConfig {
    double exec_rate_hz = 50.0;
    double duration = 5.0;
    double t_dtw = 0.02;          // modeled alignment compute time
    double blend_horizon = 0.1;
    DtwConfig dtw;
    std::size_t n_on = 3;
    std::size_t n_off = 5;
    ExecutionMode mode = ExecutionMode::blended;
    ClockMode clock = ClockMode::virtual_clock;
    Pose initial;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(exec_rate_hz > 0.0) || !(duration > 0.0) || !(t_dtw >= 0.0) || !(blend_horizon >= 0.0))
            throw PreconditionViolation("scheduler rates and durations must be positive");
        dtw.validate();
    }
};

struct SchedulerEvent {
    double t = 0.0;
    std::string event;  // chunk_arrival | switch | join
    std::optional<std::size_t> k_star;
    PolicyKind authority = PolicyKind::global;
    std::optional<double> max_jerk;
};

struct JoinRecord {
    double t = 0.0;
    std::size_t k_star = 0;      // after latency compensation
    double jump = 0.0;           // |x_new - x_old| at the join (m)
    JoinResidual residual;       // analytic left/right mismatch
    double max_jerk = 0.0;       // blend segment, m/s^3
};

struct SchedulerResult {
    Demonstration executed;
    std::vector<SchedulerEvent> events;
    std::vector<JoinRecord> joins;
    std::vector<std::string> diagnostics;
    double max_internal_accel_residual = 0.0;  // over every adopted trajectory
};

inline void write_events(const std::vector<SchedulerEvent>& events, std::ostream& out) {
    for (const auto& e : events) {
        nlohmann::json rec = {{"t", e.t}, {"event", e.event}, {"k_star", nullptr},
                              {"authority", std::string(to_string(e.authority))}, {"max_jerk", nullptr}};
        if (e.k_star) rec["k_star"] = *e.k_star;
        if (e.max_jerk) rec["max_jerk"] = *e.max_jerk;
        out << rec.dump() << '\n';
    }
}

/// Benchmark sources: a global policy following the planar path
/// x = A (1 - cos 2 pi f t), y = advance * t, and optionally a fast local
/// policy whose surface mask switches on at `contact_at`.
struct SchedulerScript {
    double latency = 0.1;
    double period = 0.1;
    std::size_t horizon = 50;
    double source_rate_hz = 50.0;
    double chunk_noise = 0.0;
    double amplitude = 0.05;   // m
    double frequency = 0.5;    // Hz
    double advance = 0.02;     // m/s
    double contact_at = -1.0;  // s; negative means no local source
    double local_period = 0.02;
    double local_latency = 0.01;
};

inline std::function<Pose(double)> planar_path(const SchedulerScript& s, const Pose& origin = {}) {
    return [s, origin](double t) {
        const Vec3 p(s.amplitude * (1.0 - std::cos(2.0 * std::numbers::pi * s.frequency * t)), s.advance * t, 0.0);
        return Pose(origin.rotation(), origin.position + origin.rotation() * p);
    };
}

inline std::vector<PolicySource> make_sources(const SchedulerScript& s, const Pose& origin = {}) {
    std::vector<PolicySource> out;
    PolicySource g;
    g.kind = PolicyKind::global;
    g.period = s.period;
    g.latency = s.latency;
    g.rate_hz = s.source_rate_hz;
    g.horizon = s.horizon;
    g.chunk_noise = s.chunk_noise;
    g.target = planar_path(s, origin);
    out.push_back(g);
    if (s.contact_at >= 0.0) {
        PolicySource l = g;
        l.kind = PolicyKind::local;
        l.period = s.local_period;
        l.latency = s.local_latency;
        l.chunk_noise = 0.0;
        const double on = s.contact_at;
        l.mask = [on](double t) { return t >= on ? SelectionMask{false, false, true, false, false, false} : SelectionMask{}; };
        out.push_back(l);
    }
    return out;
}

namespace detail {

/// Tick-level state machine shared by the virtual and realtime clocks.
class SchedulerCore {
public:
    SchedulerCore(const std::vector<PolicySource>& sources, const SchedulerConfig& cfg)
        : sources_(sources),
          cfg_(cfg),
          dt_(1.0 / cfg.exec_rate_hz),
          traj_(Trajectory::hold(cfg.initial, cfg.initial.rotation())),
          latest_(sources.size()) {
        router_.n_on = cfg.n_on;
        router_.n_off = cfg.n_off;
        const bool has_global = std::any_of(sources.begin(), sources.end(),
                                            [](const PolicySource& s) { return s.kind == PolicyKind::global; });
        if (!has_global) router_.authority = PolicyKind::local;
        result_.executed.rate_hz = cfg.exec_rate_hz;
    }

    double dt() const { return dt_; }

    /// Pose the executor will emit at t if nothing changes (used as observation).
    Pose planned_pose(double t) const { return traj_.pose_at(t); }

    void deliver(std::size_t src, ActionChunk chunk, std::size_t tick) {
        const double t = tick_time(tick);
        latest_[src] = std::make_shared<ActionChunk>(std::move(chunk));
        result_.events.push_back({t, "chunk_arrival", std::nullopt, router_.authority, std::nullopt});
        if (sources_[src].kind == router_.authority) adopt(src, tick);
    }

    void finish_tick(std::size_t tick) {
        const double t = tick_time(tick);
        route_tick(tick);
        apply_pending(tick);
        const KinState s = traj_.eval(t);
        const Pose pose = from_chart(s.x, traj_.base());
        history_.push_back({t, pose});
        while (history_.size() > cfg_.dtw.history_len) history_.pop_front();
        DemoSample ds;
        ds.t = t;
        ds.pose = pose;
        ds.twist = Twist(s.v.head<3>(), s.v.tail<3>());
        result_.executed.samples.push_back(ds);
    }

    SchedulerResult take() {
        result_.max_internal_accel_residual =
            std::max(result_.max_internal_accel_residual, traj_.max_internal_residual().acceleration);
        return std::move(result_);
    }

    double tick_time(std::size_t tick) const { return static_cast<double>(tick) * dt_; }

private:
    struct Pending {
        std::size_t tick;
        std::shared_ptr<const ActionChunk> chunk;  // resampled
        std::size_t index;
    };

    void route_tick(std::size_t tick) {
        SelectionMask local{};
        bool have_local = false;
        for (std::size_t i = 0; i < sources_.size(); ++i) {
            if (sources_[i].kind != PolicyKind::local) continue;
            have_local = true;
            if (latest_[i] && latest_[i]->mask) local = *latest_[i]->mask;
        }
        const bool have_global = std::any_of(sources_.begin(), sources_.end(),
                                             [](const PolicySource& s) { return s.kind == PolicyKind::global; });
        if (!have_local || !have_global) return;
        const PolicyKind before = router_.authority;
        router_ = route(router_, local);
        if (router_.authority != before) {
            result_.events.push_back({tick_time(tick), "switch", std::nullopt, router_.authority, std::nullopt});
            for (std::size_t i = 0; i < sources_.size(); ++i)
                if (sources_[i].kind == router_.authority && latest_[i]) adopt(i, tick);
        }
    }

    void adopt(std::size_t src, std::size_t tick) {
        const double t = tick_time(tick);
        const auto chunk = std::make_shared<const ActionChunk>(resample_chunk(*latest_[src], cfg_.exec_rate_hz));

        if (cfg_.mode == ExecutionMode::naive || (!started_ && tick == 0)) {
            // Whole chunk from its first waypoint, no alignment. A chunk ready
            // at the first tick simply defines the initial motion.
            replace_from(t, *chunk, 0, false, 0);
            pending_.reset();
            return;
        }

        std::vector<ChunkSample> hist(history_.begin(), history_.end());
        hist.push_back({t, traj_.pose_at(t)});
        std::size_t k_star = 0;
        try {
            k_star = dtw_entry_index(*chunk, hist, cfg_.dtw).k_star;
        } catch (const EmptyHistory&) {
            k_star = 0;
        }
        std::size_t index = 0;
        try {
            index = compensate_latency(k_star, cfg_.t_dtw, dt_, chunk->size());
        } catch (const ChunkExhausted& e) {
            result_.diagnostics.push_back("t=" + std::to_string(t) + ": " + e.what() + "; holding current plan");
            return;
        }
        const std::size_t delay = index - k_star;
        pending_ = Pending{tick + delay, chunk, index};
        if (delay == 0) apply_pending(tick);
    }

    void apply_pending(std::size_t tick) {
        if (!pending_ || pending_->tick > tick) return;
        const Pending p = *pending_;
        pending_.reset();
        // Late application (realtime overruns) skips the waypoints already due.
        const std::size_t index = std::min(p.index + (tick - p.tick), p.chunk->size() - 2);
        replace_from(tick_time(tick), *p.chunk, index, true, index);
    }

    void replace_from(double t, const ActionChunk& chunk, std::size_t index, bool blend, std::size_t k_star) {
        std::vector<Vec6> tail;
        for (std::size_t i = index; i < chunk.size(); ++i) tail.push_back(to_chart(chunk.samples[i].pose, traj_.base()));
        const KinState before = traj_.eval(t);
        Trajectory next(traj_.base());
        double max_jerk = 0.0;
        if (blend) {
            const auto segs = blend_append(before, t, tail, dt_, cfg_.blend_horizon);
            max_jerk = segs.front().max_linear_jerk();
            next.append(segs);
        } else {
            const auto segs = hermite_through(tail, t, dt_);
            for (const auto& s : segs) max_jerk = std::max(max_jerk, s.max_linear_jerk());
            next.append(segs);
        }
        const KinState after = next.eval(t);
        result_.max_internal_accel_residual =
            std::max(result_.max_internal_accel_residual, traj_.max_internal_residual().acceleration);
        if (started_ || blend) {
            JoinRecord j;
            j.t = t;
            j.k_star = k_star;
            j.residual = join_residual(t, before, after);
            j.jump = j.residual.position;
            j.max_jerk = max_jerk;
            result_.joins.push_back(j);
            result_.events.push_back({t, "join", k_star, router_.authority, max_jerk});
        }
        traj_ = std::move(next);
        started_ = true;
    }

    const std::vector<PolicySource>& sources_;
    SchedulerConfig cfg_;
    double dt_;
    Trajectory traj_;
    std::vector<std::shared_ptr<ActionChunk>> latest_;
    std::deque<ChunkSample> history_;
    std::optional<Pending> pending_;
    RouterState router_;
    bool started_ = false;
    SchedulerResult result_;
};

struct InFlight {
    double deliver_at;
    std::size_t source;
    std::size_t seq;
    ActionChunk chunk;
};

inline SchedulerResult run_virtual(const std::vector<PolicySource>& sources, const SchedulerConfig& cfg) {
    SchedulerCore core(sources, cfg);
    const double dt = core.dt();
    const auto ticks = static_cast<std::size_t>(std::llround(cfg.duration / dt));
    std::vector<std::size_t> launches(sources.size(), 0);
    std::vector<std::mt19937_64> rngs;
    for (std::size_t i = 0; i < sources.size(); ++i) rngs.emplace_back(cfg.seed + 0x9E3779B97F4A7C15ULL * (i + 1));
    std::vector<double> phase;
    for (const auto& s : sources) phase.push_back(s.start);
    std::vector<InFlight> flight;
    std::size_t seq = 0;
    const double eps = 1e-9;

    for (std::size_t k = 0; k < ticks; ++k) {
        const double t = core.tick_time(k);
        for (std::size_t i = 0; i < sources.size(); ++i) {
            const auto& s = sources[i];
            while (s.start + static_cast<double>(launches[i]) * s.period <= t + eps) {
                const double t_obs = s.start + static_cast<double>(launches[i]) * s.period;
                flight.push_back({t_obs + s.latency, i, seq++, s.make_chunk(t_obs, core.planned_pose(t), rngs[i], phase[i])});
                ++launches[i];
            }
        }
        std::stable_sort(flight.begin(), flight.end(), [](const InFlight& a, const InFlight& b) {
            return a.deliver_at != b.deliver_at ? a.deliver_at < b.deliver_at : a.seq < b.seq;
        });
        std::size_t n_due = 0;
        while (n_due < flight.size() && flight[n_due].deliver_at <= t + eps) ++n_due;
        for (std::size_t d = 0; d < n_due; ++d) core.deliver(flight[d].source, std::move(flight[d].chunk), k);
        flight.erase(flight.begin(), flight.begin() + static_cast<long>(n_due));
        core.finish_tick(k);
    }
    return core.take();
}

/// Wall-clock execution: one producer thread per source and the executor on
/// the calling thread. Chunks pass through a per-source atomic slot; the
/// executor swaps the slot empty and never waits on a producer.
inline SchedulerResult run_realtime(const std::vector<PolicySource>& sources, const SchedulerConfig& cfg) {
    using clock = std::chrono::steady_clock;
    SchedulerCore core(sources, cfg);
    const double dt = core.dt();
    const auto ticks = static_cast<std::size_t>(std::llround(cfg.duration / dt));

    std::vector<std::unique_ptr<std::atomic<ActionChunk*>>> slots;
    for (std::size_t i = 0; i < sources.size(); ++i) slots.push_back(std::make_unique<std::atomic<ActionChunk*>>(nullptr));
    std::mutex obs_mutex;
    Pose observed = cfg.initial;
    std::atomic<bool> stop{false};
    const auto t0 = clock::now();
    auto at = [t0](double s) { return t0 + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(s)); };

    std::vector<std::thread> producers;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        producers.emplace_back([&, i] {
            const auto& s = sources[i];
            std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL * (i + 1));
            double phase = s.start;
            for (std::size_t n = 0; !stop.load(); ++n) {
                const double t_obs = s.start + static_cast<double>(n) * s.period;
                if (t_obs >= cfg.duration) break;
                std::this_thread::sleep_until(at(t_obs));
                Pose obs;
                {
                    std::lock_guard<std::mutex> lock(obs_mutex);
                    obs = observed;
                }
                auto* chunk = new ActionChunk(s.make_chunk(t_obs, obs, rng, phase));
                std::this_thread::sleep_until(at(t_obs + s.latency));
                delete slots[i]->exchange(chunk, std::memory_order_acq_rel);
            }
        });
    }

    for (std::size_t k = 0; k < ticks; ++k) {
        std::this_thread::sleep_until(at(core.tick_time(k)));
        for (std::size_t i = 0; i < sources.size(); ++i) {
            std::unique_ptr<ActionChunk> c(slots[i]->exchange(nullptr, std::memory_order_acq_rel));
            if (c) core.deliver(i, std::move(*c), k);
        }
        core.finish_tick(k);
        std::lock_guard<std::mutex> lock(obs_mutex);
        observed = core.planned_pose(core.tick_time(k));
    }
    stop.store(true);
    for (auto& th : producers) th.join();
    for (auto& s : slots) delete s->exchange(nullptr);
    return core.take();
}

}  // namespace detail

inline SchedulerResult run_scheduler(const std::vector<PolicySource>& sources, const SchedulerConfig& cfg) {
    if (sources.empty()) throw PreconditionViolation("at least one policy source is required");
    for (const auto& s : sources) s.validate();
    cfg.validate();
    return cfg.clock == ClockMode::virtual_clock ? detail::run_virtual(sources, cfg) : detail::run_realtime(sources, cfg);
}

}  // namespace forceframe
