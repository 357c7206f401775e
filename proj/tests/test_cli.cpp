#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "forceframe/cli.hpp"
#include "forceframe/config.hpp"

using namespace forceframe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("forceframe_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int code;
    std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

Config parse(const std::string& ini) {
    Config cfg;
    std::istringstream in(ini);
    apply_config(in, cfg);
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config defaults and overrides") {
    const Config d = parse("");
    CHECK(d.scale.rho == 0.1);
    CHECK(d.recovery.window_s == 0.1);
    CHECK(d.recovery.contact_threshold == 2.0);
    CHECK(d.label.thresholds.dominance_ratio == 3.0);
    CHECK(d.scheduler.dtw.band == 10);
    CHECK(d.scheduler.n_on == 3);
    CHECK(d.scenario == "scrape");

    const Config c = parse("[metric]\nrho = 0.2\n[recovery]\nv_ref = 1, 0, 0\ndominance = 0:structural\n"
                           "[scheduler]\nmode = naive\nlatency = 0.05\n[scenario]\nname = peg\nmu = 0.3\n"
                           "[bench]\nstrategies = adaptive, twist_only\nscenarios = press\n");
    CHECK(c.scale.rho == 0.2);
    CHECK(c.recovery.scale.rho == 0.2);
    CHECK(c.bench.recovery.scale.rho == 0.2);
    CHECK(c.recovery.thresholds.v_ref == Vec3(1, 0, 0));
    CHECK(c.dominance == "0:structural");
    CHECK(c.scheduler.mode == ExecutionMode::naive);
    CHECK(c.script.latency == 0.05);
    CHECK(c.scenario == "peg");
    CHECK(c.bench.params.mu == 0.3);
    CHECK(c.bench.strategies.size() == 2);
    CHECK(c.bench.scenarios == std::vector<std::string>{"press"});
}

TEST_CASE("config rejects what it does not know") {
    CHECK_THROWS_AS(parse("[metric]\nrhoo = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metrics]\nrho = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("rho = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metric]\nrho = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse("[metric]\nrho = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[recovery]\neps_parallel = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[recovery]\nv_ref = 1, 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[recovery]\nstrategy = guess\n"), ConfigError);
    CHECK_THROWS_AS(parse("[scenario]\nname = moon\n"), ConfigError);
    CHECK_THROWS_AS(parse("[router]\nn_on = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\nkp_pos = 5000\n"), ConfigError);
    CHECK_THROWS_AS(parse("[scheduler]\nmode = eager\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/forceframe.ini"), ConfigError);
}

TEST_CASE("shipped default config matches the built-in defaults") {
    const Config file = load_config(std::string(FORCEFRAME_SOURCE_DIR) + "/configs/default.ini");
    const Config d;
    CHECK(file.scale.rho == d.scale.rho);
    CHECK(file.recovery.thresholds.eps_xi == d.recovery.thresholds.eps_xi);
    CHECK(file.recovery.thresholds.force_threshold == d.recovery.thresholds.force_threshold);
    CHECK(file.gains.kf_force == d.gains.kf_force);
    CHECK(file.scheduler.t_dtw == d.scheduler.t_dtw);
    CHECK(file.script.period == d.script.period);
    CHECK(file.noise.wrench_sigma == d.noise.wrench_sigma);
    CHECK(file.bench.seeds == d.bench.seeds);
}

TEST_CASE("config path falls back to the environment") {
    TempDir dir;
    const std::string bad = dir / "bad.ini";
    std::ofstream(bad) << "[metric]\nunknown = 1\n";
    const std::string good = dir / "good.ini";
    std::ofstream(good) << "[scenario]\nname = press\n";

    ::setenv("FORCEFRAME_CONFIG", good.c_str(), 1);
    CHECK(resolve_config(std::nullopt).scenario == "press");
    ::setenv("FORCEFRAME_CONFIG", bad.c_str(), 1);
    CHECK_THROWS_AS(resolve_config(std::nullopt), ConfigError);
    CHECK(resolve_config(good).scenario == "press");
    ::unsetenv("FORCEFRAME_CONFIG");
    CHECK(resolve_config(std::nullopt).scenario == "scrape");
}

TEST_CASE("durations") {
    CHECK(cli::parse_duration("100ms") == Catch::Approx(0.1));
    CHECK(cli::parse_duration("0.1s") == 0.1);
    CHECK(cli::parse_duration("2") == 2.0);
    CHECK_THROWS_AS(cli::parse_duration("fast"), ConfigError);
    CHECK_THROWS_AS(cli::parse_duration("-1s"), ConfigError);
    CHECK_THROWS_AS(cli::parse_duration("ms"), ConfigError);
}

TEST_CASE("exit codes") {
    TempDir dir;
    const std::string demo = dir / "demo.jsonl";
    CHECK(cli_run({"--help"}).code == 0);
    CHECK(cli_run({}).code == 2);
    CHECK(cli_run({"teleport"}).code == 2);
    CHECK(cli_run({"generate"}).code == 2);
    CHECK(cli_run({"generate", "--scenario", "moon", "--out", demo}).code == 2);
    CHECK(cli_run({"--config", dir / "missing.ini", "generate", "--out", demo}).code == 2);
    CHECK(cli_run({"recover", "--demo", dir / "missing.jsonl"}).code == 2);

    REQUIRE(cli_run({"generate", "--scenario", "scrape", "--seed", "3", "--out", demo}).code == 0);
    const auto noschedule = cli_run({"recover", "--demo", demo});
    CHECK(noschedule.code == 2);
    CHECK(noschedule.err.find("dominance") != std::string::npos);

    const std::string broken = dir / "broken.jsonl";
    std::ofstream(broken) << "{\"schema\":\"forceframe-demo-v1\",\"rate_hz\":1000}\n{oops\n";
    const auto parse_fail = cli_run({"recover", "--demo", broken, "--strategy", "wrench_only"});
    CHECK(parse_fail.code == 1);
    CHECK(parse_fail.err.find("line 2") != std::string::npos);
}

TEST_CASE("pipeline through the command line") {
    TempDir dir;
    const std::string demo = dir / "demo.jsonl", frames = dir / "frames.jsonl", labels = dir / "labels.jsonl";
    REQUIRE(cli_run({"generate", "--scenario", "scrape", "--seed", "7", "--out", demo}).code == 0);

    const auto wrench = cli_run({"recover", "--demo", demo, "--strategy", "wrench_only"});
    CHECK(wrench.code == 0);
    CHECK(wrench.out.find("[FAILURE]") != std::string::npos);

    const auto rec = cli_run({"recover", "--demo", demo, "--dominance-from-labels", "--out", frames});
    REQUIRE(rec.code == 0);
    CHECK(rec.out.find("failures 0/20") != std::string::npos);

    const auto lab = cli_run({"label", "--demo", demo, "--frames", frames, "--out", labels});
    REQUIRE(lab.code == 0);
    CHECK(lab.out.find("Surface=20") != std::string::npos);
    CHECK(lab.out.find("accuracy 1.0000") != std::string::npos);

    const auto sim = cli_run({"simulate", "--labels", labels, "--demo", demo, "--scenario", "scrape"});
    CHECK(sim.code == 0);
    CHECK(sim.out.find("force error on masked axes") != std::string::npos);

    const auto wall = cli_run({"simulate", "--structure", "surface", "--out", dir / "episode.jsonl"});
    CHECK(wall.code == 0);
    CHECK(wall.out.find("settled") != std::string::npos);
    CHECK(load_demo(dir / "episode.jsonl").size() == 4001);

    const auto sch = cli_run({"schedule", "--latency", "100ms", "--duration", "2s", "--contact-at", "1s",
                              "--out-events", dir / "events.jsonl", "--out-traj", dir / "traj.jsonl"});
    CHECK(sch.code == 0);
    CHECK(sch.out.find("1 authority switches") != std::string::npos);
    CHECK(fs::file_size(dir / "events.jsonl") > 0);
}

TEST_CASE("seeded commands are reproducible") {
    TempDir dir;
    for (const char* tag : {"a", "b"}) {
        const std::string t = tag;
        REQUIRE(cli_run({"generate", "--scenario", "press_slide", "--seed", "11", "--out", dir / ("d" + t)}).code == 0);
        REQUIRE(cli_run({"schedule", "--duration", "1s", "--chunk-noise", "0.001", "--seed", "5", "--out-events",
                         dir / ("e" + t)})
                    .code == 0);
    }
    CHECK(slurp(dir / "da") == slurp(dir / "db"));
    CHECK(slurp(dir / "ea") == slurp(dir / "eb"));
    REQUIRE(cli_run({"generate", "--scenario", "press_slide", "--seed", "12", "--out", dir / "dc"}).code == 0);
    CHECK(slurp(dir / "da") != slurp(dir / "dc"));
}

#ifdef FORCEFRAME_CLI_PATH
TEST_CASE("installed binary reports exit codes") {
    const std::string bin = FORCEFRAME_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    TempDir dir;
    CHECK(status("--help") == 0);
    CHECK(status("bogus") == 2);
    CHECK(status("generate --scenario free --out " + (dir / "f.jsonl")) == 0);
    CHECK(status("recover --demo " + (dir / "f.jsonl") + " --strategy twist_only") == 0);
}
#endif
