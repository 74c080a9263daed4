#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace geomherd {

// Online early-warning detectors over a subsampled scalar series. Samples
// carry the simulator step of their snapshot; a NaN value marks a missing
// sample (degenerate snapshot, skipped computation) and is passed over
// without resetting any detector state.

enum class DetectorKind { cusum, zscore, ewma, kendall, cusum_or_kendall };
enum class Direction { up, down };

inline std::string to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::cusum: return "cusum";
        case DetectorKind::zscore: return "zscore";
        case DetectorKind::ewma: return "ewma";
        case DetectorKind::kendall: return "kendall";
        case DetectorKind::cusum_or_kendall: return "cusum_or_kendall";
    }
    return "?";
}

inline DetectorKind detector_kind_from_string(const std::string& s) {
    if (s == "cusum") return DetectorKind::cusum;
    if (s == "zscore") return DetectorKind::zscore;
    if (s == "ewma") return DetectorKind::ewma;
    if (s == "kendall") return DetectorKind::kendall;
    if (s == "cusum_or_kendall") return DetectorKind::cusum_or_kendall;
    throw std::invalid_argument("unknown detector kind: " + s);
}

struct DetectorConfig {
    DetectorKind kind = DetectorKind::cusum;
    Direction direction = Direction::up;
    int baseline_window = 35;  // valid samples used to estimate mu/sigma
    double k_sigma = 0.5;      // CUSUM slack, or the Shewhart threshold multiple
    double h_sigma = 4.0;      // CUSUM/EWMA decision threshold multiple
    double ewma_lambda = 0.2;
    int kendall_window = 20;
    double kendall_thresh = 0.6;
    int skip_initial = 0;           // leading samples ignored entirely
    double min_baseline_var = 0.0;  // variance below this disables the detector
};

struct SeriesSample {
    int t = 0;       // simulator step of the snapshot
    double x = 0.0;  // NaN = missing
};

struct AlarmRecord {
    bool fired = false;
    int fire_time = -1;   // step of the first threshold crossing
    double score = 0.0;   // max statistic over the trace, in threshold-free units
    bool disabled = false;       // baseline variance at/below the floor
    bool insufficient = false;   // not enough valid samples to even start
    double baseline_mean = std::numeric_limits<double>::quiet_NaN();
    double baseline_sd = std::numeric_limits<double>::quiet_NaN();
};

// Kendall rank correlation (tau-b) of `v` against its own time order.
// Time has no ties; ties in v enter the denominator correction. An all-tied
// window yields 0.
inline double kendall_tau_b(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2) throw std::invalid_argument("kendall: need at least 2 points");
    long long concordant = 0, discordant = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (v[j] > v[i])
                ++concordant;
            else if (v[j] < v[i])
                ++discordant;
        }
    // tie correction over groups of equal values
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    long long tie_pairs = 0;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && sorted[j] == sorted[i]) ++j;
        const long long g = j - i;
        tie_pairs += g * (g - 1) / 2;
        i = j;
    }
    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0) * (n0 - tie_pairs));
    if (denom == 0.0) return 0.0;
    return static_cast<double>(concordant - discordant) / denom;
}

inline AlarmRecord beta_minus_alarm(const std::vector<SeriesSample>& series,
                                    const DetectorConfig& base);

inline AlarmRecord run_detector(const std::vector<SeriesSample>& series,
                                const DetectorConfig& cfg) {
    if (cfg.kind == DetectorKind::cusum_or_kendall) return beta_minus_alarm(series, cfg);
    if (cfg.baseline_window < 2 && cfg.kind != DetectorKind::kendall)
        throw std::invalid_argument("detector: baseline_window must be >= 2");
    AlarmRecord rec;

    // valid samples after the skip
    std::vector<SeriesSample> valid;
    valid.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (static_cast<int>(i) < cfg.skip_initial) continue;
        if (std::isfinite(series[i].x)) valid.push_back(series[i]);
    }

    if (cfg.kind == DetectorKind::kendall) {
        const int win = cfg.kendall_window;
        if (win < 2) throw std::invalid_argument("detector: kendall_window must be >= 2");
        if (static_cast<int>(valid.size()) < win) {
            rec.insufficient = true;
            return rec;
        }
        std::vector<double> window(win);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t end = win; end <= valid.size(); ++end) {
            for (int k = 0; k < win; ++k) window[k] = valid[end - win + k].x;
            double tau = kendall_tau_b(window);
            if (cfg.direction == Direction::down) tau = -tau;
            best = std::max(best, tau);
            if (!rec.fired && tau > cfg.kendall_thresh) {
                rec.fired = true;
                rec.fire_time = valid[end - 1].t;
            }
        }
        rec.score = best;
        return rec;
    }

    const int W = cfg.baseline_window;
    if (static_cast<int>(valid.size()) < W + 1) {
        rec.insufficient = true;
        return rec;
    }
    double mean = 0.0;
    for (int i = 0; i < W; ++i) mean += valid[i].x;
    mean /= W;
    double var = 0.0;
    for (int i = 0; i < W; ++i) var += (valid[i].x - mean) * (valid[i].x - mean);
    var /= (W - 1);
    rec.baseline_mean = mean;
    rec.baseline_sd = std::sqrt(var);
    if (var <= cfg.min_baseline_var || rec.baseline_sd == 0.0) {
        rec.disabled = true;
        return rec;
    }
    const double sd = rec.baseline_sd;
    const double sign = cfg.direction == Direction::up ? 1.0 : -1.0;

    double best = 0.0;
    if (cfg.kind == DetectorKind::cusum) {
        const double k = cfg.k_sigma * sd;
        const double h = cfg.h_sigma * sd;
        double s = 0.0;
        for (std::size_t i = W; i < valid.size(); ++i) {
            s = std::max(0.0, s + sign * (valid[i].x - mean) - k);
            best = std::max(best, s / sd);
            if (!rec.fired && s > h) {
                rec.fired = true;
                rec.fire_time = valid[i].t;
            }
        }
    } else if (cfg.kind == DetectorKind::zscore) {
        for (std::size_t i = W; i < valid.size(); ++i) {
            const double z = sign * (valid[i].x - mean) / sd;
            best = std::max(best, z);
            if (!rec.fired && z > cfg.k_sigma) {
                rec.fired = true;
                rec.fire_time = valid[i].t;
            }
        }
    } else {  // ewma
        const double lam = cfg.ewma_lambda;
        if (!(lam > 0.0 && lam <= 1.0))
            throw std::invalid_argument("detector: ewma_lambda must lie in (0,1]");
        const double limit_unit = sd * std::sqrt(lam / (2.0 - lam));
        double z = mean;
        for (std::size_t i = W; i < valid.size(); ++i) {
            z = lam * valid[i].x + (1.0 - lam) * z;
            const double stat = sign * (z - mean) / limit_unit;
            best = std::max(best, stat);
            if (!rec.fired && stat > cfg.h_sigma) {
                rec.fired = true;
                rec.fire_time = valid[i].t;
            }
        }
    }
    rec.score = best;
    return rec;
}

// Composite alarm used on the negative-curvature share: trips when either the
// level shift (CUSUM, up) or the rolling trend (Kendall) trips. The combined
// score normalises each statistic by its own firing threshold so the max is
// comparable (>= 1 iff fired).
inline AlarmRecord beta_minus_alarm(const std::vector<SeriesSample>& series,
                                    const DetectorConfig& base) {
    DetectorConfig cus = base;
    cus.kind = DetectorKind::cusum;
    cus.direction = Direction::up;
    DetectorConfig ken = base;
    ken.kind = DetectorKind::kendall;
    ken.direction = Direction::up;
    const AlarmRecord a = run_detector(series, cus);
    const AlarmRecord b = run_detector(series, ken);
    AlarmRecord rec;
    rec.disabled = a.disabled;
    rec.insufficient = a.insufficient && b.insufficient;
    rec.fired = a.fired || b.fired;
    if (a.fired && b.fired)
        rec.fire_time = std::min(a.fire_time, b.fire_time);
    else if (a.fired)
        rec.fire_time = a.fire_time;
    else if (b.fired)
        rec.fire_time = b.fire_time;
    rec.baseline_mean = a.baseline_mean;
    rec.baseline_sd = a.baseline_sd;
    const double sa = base.h_sigma > 0.0 ? a.score / base.h_sigma : 0.0;
    const double sb = base.kendall_thresh > 0.0 && std::isfinite(b.score)
                          ? b.score / base.kendall_thresh
                          : 0.0;
    rec.score = std::max(sa, sb);
    return rec;
}

}  // namespace geomherd
