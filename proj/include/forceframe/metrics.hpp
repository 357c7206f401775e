#pragma once

// Evaluation metrics: interaction-frame angular error, SPARC smoothness,
// jerk statistics, and the recovery benchmark table.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "forceframe/demo.hpp"
#include "forceframe/errors.hpp"
#include "forceframe/recovery.hpp"
#include "forceframe/scenarios.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

/// Directed angle between two unit axes, degrees.
inline double angular_error(const Vec3& recovered, const Vec3& truth) {
    if (std::abs(recovered.norm() - 1.0) > 1e-6 || std::abs(truth.norm() - 1.0) > 1e-6)
        throw PreconditionViolation("angular_error expects unit vectors");
    return rad2deg(std::acos(std::clamp(recovered.dot(truth), -1.0, 1.0)));
}

struct AngularErrorReport {
    std::vector<double> errors;  // deg
    double mean = 0.0;
    double max = 0.0;
    double failure_rate = 0.0;
    double threshold = 20.0;
};

inline AngularErrorReport make_error_report(std::vector<double> errors, double threshold_deg = 20.0) {
    AngularErrorReport r;
    r.threshold = threshold_deg;
    r.errors = std::move(errors);
    if (r.errors.empty()) return r;
    r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / static_cast<double>(r.errors.size());
    r.max = *std::max_element(r.errors.begin(), r.errors.end());
    const auto fails = std::count_if(r.errors.begin(), r.errors.end(), [&](double e) { return e > threshold_deg; });
    r.failure_rate = static_cast<double>(fails) / static_cast<double>(r.errors.size());
    return r;
}

/// Per-window z-axis error of in-contact windows against the demo's labels.
/// A contact window without a frame scores 180 degrees.
inline std::vector<double> window_errors(const Demonstration& demo, const std::vector<WindowRecovery>& windows) {
    std::vector<double> out;
    for (const auto& w : windows) {
        if (!w.contact) continue;
        const auto* gt = demo.label_at(0.5 * (w.t0 + w.t1));
        if (!gt) continue;
        out.push_back(w.frame ? angular_error(w.frame->z(), gt->frame.col(2)) : 180.0);
    }
    return out;
}

/// |W* . xi*| over the Euclidean norms of the two 6-vectors; 0 if either is zero.
inline double normalized_residual_power(const IntentEstimate& e) {
    const double nw = e.wrench_star.vector().norm();
    const double nx = e.xi_star.vector().norm();
    if (nw == 0.0 || nx == 0.0) return 0.0;
    return std::abs(power(e.wrench_star, e.xi_star)) / (nw * nx);
}

struct SparcOptions {
    double cutoff_hz = 10.0;
    double amp_threshold = 0.05;
    int pad_level = 4;  // nfft = 2^(ceil(log2 n) + pad_level)
};

/// Spectral arc length of a speed profile. The magnitude spectrum is
/// normalized by its zero-frequency value, limited to the cutoff, then
/// trimmed to the band where it exceeds the amplitude threshold.
inline double sparc(const std::vector<double>& speed, double rate_hz, const SparcOptions& opt = {}) {
    if (speed.size() < 64) throw TooShort("sparc needs at least 64 samples");
    if (!(rate_hz > 0.0)) throw PreconditionViolation("rate must be > 0");
    const int bits = static_cast<int>(std::ceil(std::log2(static_cast<double>(speed.size())))) + opt.pad_level;
    const std::size_t nfft = std::size_t{1} << bits;
    std::vector<double> in(nfft, 0.0);
    std::copy(speed.begin(), speed.end(), in.begin());
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, in);

    const double dc = std::abs(spec[0]);
    if (!(dc > 0.0)) throw PreconditionViolation("speed profile has zero mean");
    const double df = rate_hz / static_cast<double>(nfft);
    std::vector<double> f, mag;
    for (std::size_t k = 0; k < nfft / 2 && static_cast<double>(k) * df <= opt.cutoff_hz; ++k) {
        f.push_back(static_cast<double>(k) * df);
        mag.push_back(std::abs(spec[k]) / dc);
    }
    std::size_t lo = 0, hi = 0;
    bool found = false;
    for (std::size_t k = 0; k < mag.size(); ++k) {
        if (mag[k] >= opt.amp_threshold) {
            if (!found) lo = k;
            hi = k;
            found = true;
        }
    }
    if (!found || hi == lo) return 0.0;
    const double span = f[hi] - f[lo];
    double len = 0.0;
    for (std::size_t k = lo + 1; k <= hi; ++k) {
        const double dx = (f[k] - f[k - 1]) / span;
        const double dy = mag[k] - mag[k - 1];
        len += std::sqrt(dx * dx + dy * dy);
    }
    return -len;
}

/// Speed from successive positions: |p[k+1] - p[k]| * rate.
inline std::vector<double> speed_profile(const std::vector<Vec3>& p, double rate_hz) {
    std::vector<double> v;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) v.push_back((p[k + 1] - p[k]).norm() * rate_hz);
    return v;
}

inline std::vector<Vec3> positions(const Demonstration& d) {
    std::vector<Vec3> p;
    p.reserve(d.samples.size());
    for (const auto& s : d.samples) p.push_back(s.pose.position);
    return p;
}

struct JerkStats {
    double max_jerk = 0.0;  // m/s^3
    double rms_jerk = 0.0;
};

inline JerkStats jerk_stats(const std::vector<Vec3>& p, double rate_hz) {
    if (p.size() < 4) throw TooShort("jerk needs at least 4 samples");
    const double r3 = rate_hz * rate_hz * rate_hz;
    JerkStats s;
    double sq = 0.0;
    const std::size_t n = p.size() - 3;
    for (std::size_t k = 0; k < n; ++k) {
        const double j = ((p[k + 3] - 3.0 * p[k + 2] + 3.0 * p[k + 1] - p[k]) * r3).norm();
        s.max_jerk = std::max(s.max_jerk, j);
        sq += j * j;
    }
    s.rms_jerk = std::sqrt(sq / static_cast<double>(n));
    return s;
}

/// Max |dF/dt| by first difference of the force channels, N/s.
inline double force_jerk_max(const std::vector<Vec3>& f, double rate_hz) {
    if (f.size() < 4) throw TooShort("force jerk needs at least 4 samples");
    double m = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) m = std::max(m, (f[k + 1] - f[k]).norm() * rate_hz);
    return m;
}

struct SmoothnessReport {
    double sparc = 0.0;
    double max_jerk = 0.0;
    double rms_jerk = 0.0;
    double force_jerk = 0.0;
};

inline SmoothnessReport smoothness(const Demonstration& d, const SparcOptions& opt = {}) {
    SmoothnessReport r;
    const auto p = positions(d);
    r.sparc = sparc(speed_profile(p, d.rate_hz), d.rate_hz, opt);
    const auto j = jerk_stats(p, d.rate_hz);
    r.max_jerk = j.max_jerk;
    r.rms_jerk = j.rms_jerk;
    std::vector<Vec3> f;
    for (const auto& s : d.samples) f.push_back(s.wrench.linear);
    r.force_jerk = force_jerk_max(f, d.rate_hz);
    return r;
}

// ---------------------------------------------------------------------------
// Recovery benchmark

struct RecoveryBenchmarkSpec {
    std::vector<RecoveryStrategy> strategies{RecoveryStrategy::adaptive, RecoveryStrategy::wrench_only,
                                             RecoveryStrategy::twist_only};
    std::vector<std::string> scenarios{"scrape", "press", "press_slide"};
    std::vector<double> wrench_sigmas{0.5};  // N
    double twist_sigma = 0.002;              // m/s
    std::size_t seeds = 50;
    std::uint64_t base_seed = 1;
    PresetParams params;
    RecoveryOptions recovery;
    double failure_threshold_deg = 20.0;
};

struct BenchmarkCell {
    std::string strategy;
    std::string scenario;
    double wrench_sigma = 0.0;
    std::size_t seeds = 0;
    std::size_t windows = 0;
    double mean_error = 0.0;
    double max_error = 0.0;
    double failure_rate = 0.0;
    double max_residual_power = 0.0;  // normalized, over all intents in the cell
};

inline std::vector<BenchmarkCell> recovery_benchmark(const RecoveryBenchmarkSpec& spec) {
    std::vector<BenchmarkCell> out;
    for (const auto& name : spec.scenarios) {
        const auto preset = make_preset(name, spec.params);
        if (!preset) throw ConfigError("unknown scenario '" + name + "'");
        for (double sigma : spec.wrench_sigmas) {
            NoiseModel noise;
            noise.wrench_sigma = sigma;
            noise.twist_sigma = spec.twist_sigma;
            std::vector<Demonstration> demos;
            for (std::size_t s = 0; s < spec.seeds; ++s)
                demos.push_back(synthesize_demo(preset->scenario, preset->script, noise, spec.base_seed + s));
            for (const auto strategy : spec.strategies) {
                BenchmarkCell cell;
                cell.strategy = std::string(to_string(strategy));
                cell.scenario = name;
                cell.wrench_sigma = sigma;
                cell.seeds = spec.seeds;
                std::vector<double> errs;
                for (const auto& d : demos) {
                    const auto schedule = DominanceSchedule::from_labels(d);
                    const auto windows = recover_with_strategy(d, strategy, &schedule, spec.recovery);
                    for (const auto& w : windows)
                        if (w.intent) cell.max_residual_power = std::max(cell.max_residual_power, normalized_residual_power(*w.intent));
                    const auto e = window_errors(d, windows);
                    errs.insert(errs.end(), e.begin(), e.end());
                }
                const auto rep = make_error_report(std::move(errs), spec.failure_threshold_deg);
                cell.windows = rep.errors.size();
                cell.mean_error = rep.mean;
                cell.max_error = rep.max;
                cell.failure_rate = rep.failure_rate;
                out.push_back(cell);
            }
        }
    }
    return out;
}

inline void write_benchmark_csv(const std::vector<BenchmarkCell>& cells, std::ostream& out) {
    out << "strategy,scenario,wrench_sigma,seeds,windows,mean_error_deg,max_error_deg,failure_rate\n";
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(6);
    for (const auto& c : cells)
        out << c.strategy << ',' << c.scenario << ',' << c.wrench_sigma << ',' << c.seeds << ',' << c.windows << ','
            << c.mean_error << ',' << c.max_error << ',' << c.failure_rate << '\n';
    out.flags(flags);
    out.precision(prec);
}

}  // namespace forceframe
