#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "geomherd/rng.hpp"

namespace geomherd {

// Stylized slow-drift benchmark: unit-variance Gaussian noise, mean ramping
// linearly after an onset. Both detectors know mu=0, sigma=1 exactly; their
// thresholds are calibrated on independent stationary paths to a common
// per-path false-alarm budget, then raced on drifting paths. This isolates
// the structural advantage of cumulative statistics for gradual changes.

struct DriftBenchConfig {
    int null_len = 450;        // length of stationary paths (calibration + FAR check)
    int drift_len = 400;       // post-onset horizon on drifting paths
    double slope = 0.05;       // mean drift per step, in sigma units
    double target_far = 0.10;  // per-path false-alarm budget
    int n_paths = 4000;        // Monte Carlo paths per arm
    double cusum_k = 0.5;      // CUSUM slack, in sigma units
    std::uint64_t seed = 7;
};

struct DriftBenchResult {
    double cusum_h = 0.0;      // calibrated CUSUM threshold (sigma units)
    double shewhart_z = 0.0;   // calibrated one-sided z threshold
    double cusum_far = 0.0;    // achieved per-path FAR on held-out nulls
    double shewhart_far = 0.0;
    double cusum_median_delay = 0.0;
    double shewhart_median_delay = 0.0;
    double cusum_detection_rate = 0.0;
    double shewhart_detection_rate = 0.0;
    double delay_ratio = 0.0;  // shewhart / cusum median delay
};

namespace detail {

// Smallest threshold whose per-path exceedance rate on the calibration
// maxima is <= far.
inline double calibrate_threshold(std::vector<double> maxima, double far) {
    std::sort(maxima.begin(), maxima.end());
    const std::size_t n = maxima.size();
    auto idx = static_cast<std::size_t>(std::ceil((1.0 - far) * static_cast<double>(n)));
    if (idx >= n) idx = n - 1;
    if (idx == 0) idx = 1;
    return maxima[idx - 1];
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline DriftBenchResult stylized_drift_benchmark(const DriftBenchConfig& cfg) {
    if (cfg.n_paths < 100) throw std::invalid_argument("drift benchmark: n_paths too small");
    if (!(cfg.target_far > 0.0 && cfg.target_far < 1.0))
        throw std::invalid_argument("drift benchmark: target_far must lie in (0,1)");
    if (cfg.slope <= 0.0) throw std::invalid_argument("drift benchmark: slope must be positive");

    DriftBenchResult out;

    // --- calibration on stationary paths ---
    std::vector<double> max_s(cfg.n_paths), max_x(cfg.n_paths);
    for (int p = 0; p < cfg.n_paths; ++p) {
        Rng rng(mix_key(cfg.seed, 0xD1, static_cast<std::uint64_t>(p)));
        double s = 0.0, ms = 0.0, mx = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < cfg.null_len; ++t) {
            const double x = rng.normal();
            s = std::max(0.0, s + x - cfg.cusum_k);
            ms = std::max(ms, s);
            mx = std::max(mx, x);
        }
        max_s[p] = ms;
        max_x[p] = mx;
    }
    out.cusum_h = detail::calibrate_threshold(max_s, cfg.target_far);
    out.shewhart_z = detail::calibrate_threshold(max_x, cfg.target_far);

    // --- achieved FAR on held-out stationary paths ---
    int fa_cusum = 0, fa_shew = 0;
    for (int p = 0; p < cfg.n_paths; ++p) {
        Rng rng(mix_key(cfg.seed, 0xD2, static_cast<std::uint64_t>(p)));
        double s = 0.0;
        bool fc = false, fs = false;
        for (int t = 0; t < cfg.null_len && !(fc && fs); ++t) {
            const double x = rng.normal();
            s = std::max(0.0, s + x - cfg.cusum_k);
            if (s > out.cusum_h) fc = true;
            if (x > out.shewhart_z) fs = true;
        }
        fa_cusum += fc;
        fa_shew += fs;
    }
    out.cusum_far = static_cast<double>(fa_cusum) / cfg.n_paths;
    out.shewhart_far = static_cast<double>(fa_shew) / cfg.n_paths;

    // --- drifting paths ---
    std::vector<double> delay_c, delay_s;
    delay_c.reserve(cfg.n_paths);
    delay_s.reserve(cfg.n_paths);
    for (int p = 0; p < cfg.n_paths; ++p) {
        Rng rng(mix_key(cfg.seed, 0xD3, static_cast<std::uint64_t>(p)));
        double s = 0.0;
        int dc = -1, ds = -1;
        for (int t = 1; t <= cfg.drift_len && (dc < 0 || ds < 0); ++t) {
            const double x = cfg.slope * t + rng.normal();
            s = std::max(0.0, s + x - cfg.cusum_k);
            if (dc < 0 && s > out.cusum_h) dc = t;
            if (ds < 0 && x > out.shewhart_z) ds = t;
        }
        if (dc > 0) delay_c.push_back(dc);
        if (ds > 0) delay_s.push_back(ds);
    }
    out.cusum_detection_rate = static_cast<double>(delay_c.size()) / cfg.n_paths;
    out.shewhart_detection_rate = static_cast<double>(delay_s.size()) / cfg.n_paths;
    out.cusum_median_delay = detail::median_of(std::move(delay_c));
    out.shewhart_median_delay = detail::median_of(std::move(delay_s));
    out.delay_ratio = out.shewhart_median_delay / out.cusum_median_delay;
    return out;
}

}  // namespace geomherd
