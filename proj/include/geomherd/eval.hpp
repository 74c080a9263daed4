#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/detectors.hpp"
#include "geomherd/rng.hpp"

namespace geomherd {

// Scoring a detector against a labelled trajectory pool. A positive
// trajectory is one whose generator was in the regime that produces a
// coordination event; the event time is the step the event condition first
// held. A fire strictly before the event is a leading detection; a fire at
// or after it still counts as a detection but earns no lead. Positive
// trajectories that never realised their event within the horizon cannot
// anchor a lead and are excluded (counted, not silently dropped).

struct TrajectoryOutcome {
    std::string id;
    bool positive = false;
    bool excluded = false;  // positive without a realised event
    bool fired = false;
    bool disabled = false;  // detector could not run (flat/short baseline)
    int fire_time = -1;
    int event_time = -1;
    bool lead_fire = false;  // fired strictly before the event
    double lead = std::numeric_limits<double>::quiet_NaN();  // event - fire
    double score = 0.0;
};

inline TrajectoryOutcome score_trajectory(const std::string& id, bool positive_label,
                                          int event_time, const AlarmRecord& alarm) {
    TrajectoryOutcome o;
    o.id = id;
    o.positive = positive_label;
    o.event_time = event_time;
    o.disabled = alarm.disabled || alarm.insufficient;
    o.fired = alarm.fired;
    o.fire_time = alarm.fire_time;
    o.score = o.disabled ? 0.0 : alarm.score;
    if (positive_label && event_time < 0) {
        o.excluded = true;
        return o;
    }
    if (positive_label && alarm.fired && alarm.fire_time < event_time) {
        o.lead_fire = true;
        o.lead = static_cast<double>(event_time - alarm.fire_time);
    }
    return o;
}

struct ConfidenceInterval {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double median_sorted(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline double median_value(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return detail::median_sorted(v);
}

// Percentile bootstrap CI for the median of `values`. Resamples are driven
// by a counter-based stream so the interval is independent of call order.
inline ConfidenceInterval bootstrap_median_ci(const std::vector<double>& values,
                                              int n_boot, std::uint64_t seed,
                                              double alpha = 0.05) {
    ConfidenceInterval ci;
    if (values.empty() || n_boot < 2) return ci;
    const std::size_t n = values.size();
    std::vector<double> stats(static_cast<std::size_t>(n_boot));
    std::vector<double> sample(n);
    for (int r = 0; r < n_boot; ++r) {
        Rng rng(mix_key(seed, 0xB007ULL, static_cast<std::uint64_t>(r)));
        for (std::size_t i = 0; i < n; ++i) sample[i] = values[rng.below(n)];
        std::sort(sample.begin(), sample.end());
        stats[static_cast<std::size_t>(r)] = detail::median_sorted(sample);
    }
    std::sort(stats.begin(), stats.end());
    auto lo_idx = static_cast<std::size_t>(std::floor(alpha / 2.0 * n_boot));
    auto hi_idx = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * n_boot)) - 1;
    lo_idx = std::min(lo_idx, stats.size() - 1);
    hi_idx = std::min(hi_idx, stats.size() - 1);
    ci.lo = stats[lo_idx];
    ci.hi = stats[hi_idx];
    return ci;
}

// Rank-based AUROC with tie-averaged ranks (probability a random positive
// outscores a random negative, ties at half credit).
inline double auroc(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        return std::numeric_limits<double>::quiet_NaN();
    struct Item {
        double s;
        bool pos;
    };
    std::vector<Item> items;
    items.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) items.push_back({s, true});
    for (double s : neg_scores) items.push_back({s, false});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.s < b.s; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].s == items[i].s) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (items[k].pos) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(pos_scores.size());
    const double nn = static_cast<double>(neg_scores.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// Average precision computed per distinct score threshold (descending), so
// tied scores enter as one block and the result is order-invariant.
inline double auprc(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores) {
    if (pos_scores.empty()) return std::numeric_limits<double>::quiet_NaN();
    struct Item {
        double s;
        bool pos;
    };
    std::vector<Item> items;
    items.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) items.push_back({s, true});
    for (double s : neg_scores) items.push_back({s, false});
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.s > b.s; });
    const double total_pos = static_cast<double>(pos_scores.size());
    double tp = 0.0, fp = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        double tp_block = 0.0, fp_block = 0.0;
        while (j < items.size() && items[j].s == items[i].s) {
            if (items[j].pos)
                tp_block += 1.0;
            else
                fp_block += 1.0;
            ++j;
        }
        tp += tp_block;
        fp += fp_block;
        const double precision = tp / (tp + fp);
        ap += precision * (tp_block / total_pos);
        i = j;
    }
    return ap;
}

struct PooledMetrics {
    int n_pos = 0;       // positives with a realised event
    int n_neg = 0;
    int n_excluded = 0;  // positives without one
    int n_lead = 0;      // fired strictly before the event
    int n_late = 0;      // fired at/after the event
    int n_miss = 0;
    int n_fp = 0;
    int n_tn = 0;
    int n_disabled = 0;
    double precision = std::numeric_limits<double>::quiet_NaN();
    double recall_lead = std::numeric_limits<double>::quiet_NaN();
    double recall_fire = std::numeric_limits<double>::quiet_NaN();
    double far = std::numeric_limits<double>::quiet_NaN();
    double auroc_score = std::numeric_limits<double>::quiet_NaN();
    double auprc_score = std::numeric_limits<double>::quiet_NaN();
    double median_lead = std::numeric_limits<double>::quiet_NaN();
    ConfidenceInterval lead_ci;
    std::vector<double> leads;  // per-trajectory leads (for paired contrasts)
};

inline PooledMetrics pool_outcomes(const std::vector<TrajectoryOutcome>& outcomes,
                                   int n_boot = 5000, std::uint64_t seed = 17) {
    PooledMetrics m;
    std::vector<double> pos_scores, neg_scores;
    for (const auto& o : outcomes) {
        if (o.disabled) ++m.n_disabled;
        if (o.excluded) {
            ++m.n_excluded;
            continue;
        }
        if (o.positive) {
            ++m.n_pos;
            pos_scores.push_back(o.score);
            if (o.lead_fire) {
                ++m.n_lead;
                m.leads.push_back(o.lead);
            } else if (o.fired) {
                ++m.n_late;
            } else {
                ++m.n_miss;
            }
        } else {
            ++m.n_neg;
            neg_scores.push_back(o.score);
            if (o.fired)
                ++m.n_fp;
            else
                ++m.n_tn;
        }
    }
    const int fires_true = m.n_lead + m.n_late;
    if (fires_true + m.n_fp > 0)
        m.precision = static_cast<double>(fires_true) / (fires_true + m.n_fp);
    if (m.n_pos > 0) {
        m.recall_lead = static_cast<double>(m.n_lead) / m.n_pos;
        m.recall_fire = static_cast<double>(fires_true) / m.n_pos;
    }
    if (m.n_neg > 0) m.far = static_cast<double>(m.n_fp) / m.n_neg;
    m.auroc_score = auroc(pos_scores, neg_scores);
    m.auprc_score = auprc(pos_scores, neg_scores);
    if (!m.leads.empty()) {
        m.median_lead = median_value(m.leads);
        m.lead_ci = bootstrap_median_ci(m.leads, n_boot, seed);
    }
    return m;
}

// Paired two-sided bootstrap test on per-trajectory lead differences
// (detector A minus detector B on trajectories where both led). The
// resampled statistic is the median difference; the p-value is twice the
// smaller tail mass of that statistic around zero.
struct PairedLeadTest {
    int n_pairs = 0;
    double median_diff = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
    ConfidenceInterval ci;
};

inline PairedLeadTest paired_bootstrap_lead(const std::vector<double>& diffs,
                                            int n_boot = 5000, std::uint64_t seed = 23) {
    PairedLeadTest out;
    out.n_pairs = static_cast<int>(diffs.size());
    if (diffs.size() < 2 || n_boot < 2) return out;
    out.median_diff = median_value(diffs);
    const std::size_t n = diffs.size();
    std::vector<double> stats(static_cast<std::size_t>(n_boot));
    std::vector<double> sample(n);
    int n_le = 0, n_ge = 0;
    for (int r = 0; r < n_boot; ++r) {
        Rng rng(mix_key(seed, 0xBAEDULL, static_cast<std::uint64_t>(r)));
        for (std::size_t i = 0; i < n; ++i) sample[i] = diffs[rng.below(n)];
        std::sort(sample.begin(), sample.end());
        const double s = detail::median_sorted(sample);
        stats[static_cast<std::size_t>(r)] = s;
        if (s <= 0.0) ++n_le;
        if (s >= 0.0) ++n_ge;
    }
    const double frac_le = static_cast<double>(n_le) / n_boot;
    const double frac_ge = static_cast<double>(n_ge) / n_boot;
    out.p_value = std::min(1.0, 2.0 * std::min(frac_le, frac_ge));
    std::sort(stats.begin(), stats.end());
    auto lo_idx = static_cast<std::size_t>(std::floor(0.025 * n_boot));
    auto hi_idx = static_cast<std::size_t>(std::ceil(0.975 * n_boot)) - 1;
    out.ci.lo = stats[std::min(lo_idx, stats.size() - 1)];
    out.ci.hi = stats[std::min(hi_idx, stats.size() - 1)];
    return out;
}

}  // namespace geomherd
