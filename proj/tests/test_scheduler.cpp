#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catch_amalgamated.hpp"
#include "forceframe/scheduler.hpp"

using namespace forceframe;
using Catch::Approx;

namespace {

// Exhaustive search over monotone paths from (0, j0) to (i, m-1).
struct Brute {
    const Eigen::MatrixXd& c;
    int band;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;

    void walk(std::size_t i, std::size_t j, std::size_t j0, double acc) {
        const long off = static_cast<long>(i) - (static_cast<long>(j) - static_cast<long>(j0));
        if (band >= 0 && std::abs(off) > band) return;
        acc += c(static_cast<long>(i), static_cast<long>(j));
        if (j + 1 == static_cast<std::size_t>(c.cols())) {
            if (acc < best || (acc == best && i < best_i)) {
                best = acc;
                best_i = i;
            }
        }
        const bool down = i + 1 < static_cast<std::size_t>(c.rows());
        const bool right = j + 1 < static_cast<std::size_t>(c.cols());
        if (down) walk(i + 1, j, j0, acc);
        if (right) walk(i, j + 1, j0, acc);
        if (down && right) walk(i + 1, j + 1, j0, acc);
    }

    void run() {
        for (std::size_t j0 = 0; j0 < static_cast<std::size_t>(c.cols()); ++j0) walk(0, j0, j0, 0.0);
    }
};

std::vector<ChunkSample> line_samples(long first, std::size_t n, double dt) {
    std::vector<ChunkSample> out;
    for (std::size_t k = 0; k < n; ++k) {
        const long idx = first + static_cast<long>(k);
        const double t = static_cast<double>(idx) * dt;
        // accelerating so that distinct indices have distinct velocities
        out.push_back({t, Pose(Rotation::Identity(), Vec3(0.01 * idx + 0.0005 * idx * idx, 0, 0))});
    }
    return out;
}

SchedulerResult run_script(const SchedulerScript& script, SchedulerConfig cfg = {}) {
    return run_scheduler(make_sources(script, cfg.initial), cfg);
}

}  // namespace

TEST_CASE("chunk resampling") {
    ActionChunk c;
    for (int i = 0; i <= 10; ++i)
        c.samples.push_back({0.1 * i, Pose(rot_z(0.02 * i), Vec3(0.1 * i, 0, 0))});
    const auto r = resample_chunk(c, 50.0);
    REQUIRE(r.size() == 51);
    for (std::size_t k = 0; k < r.size(); ++k) {
        CHECK(r.samples[k].t == Approx(0.02 * k).margin(1e-12));
        CHECK(r.samples[k].pose.position.x() == Approx(0.02 * k).margin(1e-12));
        CHECK(geodesic_angle(r.samples[k].pose.rotation(), rot_z(0.004 * k)) <= 1e-9);
    }

    const auto same = resample_chunk(r, 50.0);
    REQUIRE(same.size() == r.size());
    for (std::size_t k = 0; k < r.size(); ++k)
        CHECK((same.samples[k].pose.position - r.samples[k].pose.position).norm() <= 1e-12);

    ActionChunk odd;
    odd.samples = {{0.0, Pose()}, {0.05, Pose(Rotation::Identity(), Vec3(1, 0, 0))}};
    const auto o = resample_chunk(odd, 50.0);
    REQUIRE(o.size() == 4);
    CHECK(o.samples.back().t == 0.05);

    ActionChunk bad;
    bad.samples = {{0.0, Pose()}, {0.0, Pose()}};
    CHECK_THROWS_AS(resample_chunk(bad, 50.0), PreconditionViolation);
}

TEST_CASE("alignment DP agrees with exhaustive search") {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> size(1, 6), bands(-1, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        Eigen::MatrixXd c(size(rng), size(rng));
        for (long i = 0; i < c.rows(); ++i)
            for (long j = 0; j < c.cols(); ++j) c(i, j) = u(rng);
        const int band = bands(rng);
        Brute b{c, band};
        b.run();
        const auto r = dtw_on_costs(c, band);
        CHECK(r.cost == b.best);
        CHECK(r.k_star == b.best_i);
        REQUIRE_FALSE(r.path.empty());
        CHECK(r.path.front() == std::pair<std::size_t, std::size_t>(0, r.start_column));
        CHECK(r.path.back() == std::pair<std::size_t, std::size_t>(r.k_star, c.cols() - 1));
        double along = 0.0;
        for (const auto& [i, j] : r.path) along += c(static_cast<long>(i), static_cast<long>(j));
        CHECK(along == Approx(r.cost).epsilon(1e-12));
    }
}

TEST_CASE("alignment recovers a known delay") {
    DtwConfig cfg;
    const double dt = 0.02;
    for (std::size_t shift = 0; shift <= 8; ++shift) {
        INFO("shift " << shift);
        const auto hist = line_samples(100 - 24, 25, dt);
        ActionChunk pred;
        pred.samples = line_samples(100 - static_cast<long>(shift), 50, dt);
        CHECK(dtw_entry_index(pred, hist, cfg).k_star == shift);
    }
    ActionChunk pred;
    pred.samples = line_samples(0, 10, dt);
    CHECK_THROWS_AS(dtw_entry_index(pred, line_samples(0, 1, dt), cfg), EmptyHistory);
}

TEST_CASE("latency compensation") {
    CHECK(compensate_latency(3, 0.02, 0.02, 50) == 4);
    CHECK(compensate_latency(3, 0.03, 0.02, 50) == 5);
    CHECK(compensate_latency(3, 0.0, 0.02, 50) == 3);
    CHECK(compensate_latency(47, 0.1, 0.02, 50) == 48);
    CHECK_THROWS_AS(compensate_latency(49, 0.02, 0.02, 50), ChunkExhausted);
    CHECK_THROWS_AS(compensate_latency(0, 0.02, 0.02, 1), ChunkExhausted);
    CHECK_THROWS_AS(compensate_latency(0, -1.0, 0.02, 50), PreconditionViolation);
    std::size_t prev = 0;
    for (std::size_t k = 0; k <= 48; ++k) {
        const auto c = compensate_latency(k, 0.05, 0.02, 50);
        CHECK(c >= prev);
        CHECK(c >= k);
        prev = c;
    }
}

TEST_CASE("authority routing has hysteresis") {
    std::mt19937_64 rng(52);
    std::bernoulli_distribution contact(0.6);
    for (int trial = 0; trial < 50; ++trial) {
        RouterState s;
        s.n_on = 1 + trial % 4;
        s.n_off = 1 + trial % 6;
        std::deque<bool> recent;
        PolicyKind expect = PolicyKind::global;
        for (int k = 0; k < 400; ++k) {
            const bool on = contact(rng);
            recent.push_back(on);
            if (recent.size() > 10) recent.pop_front();
            auto last_n_all = [&](std::size_t n, bool v) {
                if (recent.size() < n) return false;
                return std::all_of(recent.end() - static_cast<long>(n), recent.end(), [v](bool x) { return x == v; });
            };
            if (expect == PolicyKind::global && last_n_all(s.n_on, true)) expect = PolicyKind::local;
            else if (expect == PolicyKind::local && last_n_all(s.n_off, false)) expect = PolicyKind::global;
            s = route(s, on ? SelectionMask{false, false, true, false, false, false} : SelectionMask{});
            REQUIRE(s.authority == expect);
        }
    }
}

TEST_CASE("a delay-free straight-line source is replayed exactly") {
    SchedulerScript script;
    script.latency = 0.0;
    script.amplitude = 0.0;
    script.advance = 0.05;
    SchedulerConfig cfg;
    cfg.duration = 2.0;
    const auto r = run_script(script, cfg);
    REQUIRE(r.executed.size() == 100);
    for (const auto& s : r.executed.samples) CHECK(std::abs(s.pose.position.y() - 0.05 * s.t) <= 1e-9);
    for (const auto& j : r.joins) CHECK(j.jump <= 1e-9);
}

TEST_CASE("blended execution is continuous, naive execution jumps") {
    const SchedulerScript script;
    SchedulerConfig cfg;
    cfg.duration = 3.0;
    const auto blended = run_script(script, cfg);
    REQUIRE(blended.joins.size() > 20);
    for (const auto& j : blended.joins) {
        CHECK(j.jump <= 1e-9);
        CHECK(j.residual.velocity <= 1e-9);
        CHECK(j.residual.acceleration <= 1e-6);
    }
    CHECK(blended.max_internal_accel_residual <= 1e-6);

    cfg.mode = ExecutionMode::naive;
    const auto naive = run_script(script, cfg);
    double worst = 0.0;
    for (const auto& j : naive.joins) worst = std::max(worst, j.jump);
    CHECK(worst > 1e-3);
}

TEST_CASE("virtual clock runs are deterministic") {
    SchedulerScript script;
    script.chunk_noise = 0.002;
    script.contact_at = 1.0;
    SchedulerConfig cfg;
    cfg.duration = 2.0;
    cfg.seed = 9;
    const auto a = run_script(script, cfg);
    const auto b = run_script(script, cfg);
    std::ostringstream ea, eb;
    write_events(a.events, ea);
    write_events(b.events, eb);
    CHECK(ea.str() == eb.str());
    REQUIRE(a.executed.size() == b.executed.size());
    for (std::size_t i = 0; i < a.executed.size(); ++i) CHECK(a.executed.samples[i] == b.executed.samples[i]);
}

TEST_CASE("contact hands authority to the local policy") {
    SchedulerScript script;
    script.contact_at = 2.0;
    SchedulerConfig cfg;
    cfg.duration = 4.0;
    const auto r = run_script(script, cfg);
    std::vector<SchedulerEvent> switches;
    for (const auto& e : r.events)
        if (e.event == "switch") switches.push_back(e);
    REQUIRE(switches.size() == 1);
    CHECK(switches[0].authority == PolicyKind::local);
    const double dt = 1.0 / cfg.exec_rate_hz;
    CHECK(switches[0].t >= 2.0);
    CHECK(switches[0].t <= 2.0 + script.local_latency + static_cast<double>(cfg.n_on) * dt + dt + 1e-9);
    for (const auto& e : r.events)
        if (e.event == "join" && e.t > switches[0].t) CHECK(e.authority == PolicyKind::local);
}

TEST_CASE("event log records") {
    SchedulerScript script;
    SchedulerConfig cfg;
    cfg.duration = 1.0;
    const auto r = run_script(script, cfg);
    std::stringstream io;
    write_events(r.events, io);
    std::string line;
    std::size_t n = 0;
    while (std::getline(io, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("t"));
        CHECK(j.contains("k_star"));
        CHECK(j.contains("max_jerk"));
        CHECK(j.at("authority") == "global");
        const auto ev = j.at("event").get<std::string>();
        CHECK((ev == "chunk_arrival" || ev == "join" || ev == "switch"));
        if (ev == "join") CHECK(j.at("k_star").is_number_unsigned());
        ++n;
    }
    CHECK(n == r.events.size());
}

TEST_CASE("scheduler preconditions") {
    CHECK_THROWS_AS(run_scheduler({}, {}), PreconditionViolation);
    PolicySource s;
    CHECK_THROWS_AS(run_scheduler({s}, {}), PreconditionViolation);
    SchedulerConfig cfg;
    cfg.dtw.history_len = 1;
    CHECK_THROWS_AS(run_script({}, cfg), PreconditionViolation);
}
