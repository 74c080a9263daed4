#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "geomherd/graph.hpp"
#include "geomherd/trajectory.hpp"

namespace geomherd {

// Effective behavioural vocabulary. Each agent's trailing window is reduced
// to a triple of [0,1] features, quantised through a fixed scalar codebook
// (3 dimensions x 4 uniform levels = 64 codes), and the population's code
// distribution is scored by its exponentiated entropy:
//     V_eff = exp(H(p))  in [1, 64].
// Herding collapses the population onto few codes, contracting V_eff.
struct VeffConfig {
    int levels = 4;  // quantisation levels per feature dimension
};

struct BehavioralFeature {
    double mean_action = 0.0;         // window-mean action, rescaled to [0,1]
    double switch_rate = 0.0;         // fraction of consecutive-step changes
    double majority_agreement = 0.0;  // fraction of steps matching the modal action
};

// features of one agent over the 0-indexed row range [lo, hi)
inline BehavioralFeature window_features(const ActionTrajectory& traj, int agent, int lo,
                                         int hi, const std::vector<std::int8_t>& mode_per_step) {
    if (hi - lo < 1) throw std::invalid_argument("veff: empty window");
    BehavioralFeature f;
    double sum = 0.0;
    int switches = 0, match = 0;
    for (int r = lo; r < hi; ++r) {
        const std::int8_t a = traj.action(r, agent);
        sum += a;
        if (r > lo && a != traj.action(r - 1, agent)) ++switches;
        if (a == mode_per_step[r]) ++match;
    }
    const int len = hi - lo;
    const double span = traj.alphabet > 1 ? traj.alphabet - 1.0 : 1.0;
    f.mean_action = (sum / len - traj.action_min) / span;
    f.switch_rate = len > 1 ? static_cast<double>(switches) / (len - 1) : 0.0;
    f.majority_agreement = static_cast<double>(match) / len;
    return f;
}

inline int quantize01(double x, int levels) {
    if (x < 0.0 || x > 1.0 || !std::isfinite(x))
        throw std::invalid_argument("veff: feature outside [0,1]");
    int b = static_cast<int>(x * levels);
    if (b >= levels) b = levels - 1;
    return b;
}

inline int fsq_code(const BehavioralFeature& f, int levels) {
    const int b0 = quantize01(f.mean_action, levels);
    const int b1 = quantize01(f.switch_rate, levels);
    const int b2 = quantize01(f.majority_agreement, levels);
    return b0 + levels * (b1 + levels * b2);
}

// exponentiated Shannon entropy (natural log) of a code histogram
inline double exp_entropy(const std::vector<int>& counts, int total) {
    if (total <= 0) throw std::invalid_argument("veff: empty population");
    double h = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return std::exp(h);
}

struct VeffPoint {
    int t = 0;  // window's right-edge step, matching the snapshot grid
    double veff = 0.0;
};

// V_eff aligned with the snapshot grid of `grid` (window/stride).
inline std::vector<VeffPoint> veff_series(const ActionTrajectory& traj, const GraphConfig& grid,
                                          const VeffConfig& cfg = {}) {
    if (grid.window > traj.horizon)
        throw std::invalid_argument("veff: window exceeds trajectory horizon");
    const int n = traj.n_agents;
    const int n_codes = cfg.levels * cfg.levels * cfg.levels;

    // per-step modal action (ties -> smallest action value)
    std::vector<std::int8_t> mode(traj.horizon, 0);
    std::vector<int> hist(traj.alphabet);
    for (int r = 0; r < traj.horizon; ++r) {
        std::fill(hist.begin(), hist.end(), 0);
        for (int i = 0; i < n; ++i) ++hist[traj.action(r, i) - traj.action_min];
        int best = 0;
        for (int a = 1; a < traj.alphabet; ++a)
            if (hist[a] > hist[best]) best = a;
        mode[r] = static_cast<std::int8_t>(best + traj.action_min);
    }

    std::vector<VeffPoint> out;
    std::vector<int> counts(n_codes);
    for (int t = grid.window; t <= traj.horizon; t += grid.stride) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i)
            ++counts[fsq_code(window_features(traj, i, t - grid.window, t, mode), cfg.levels)];
        out.push_back({t, exp_entropy(counts, n)});
    }
    return out;
}

}  // namespace geomherd
