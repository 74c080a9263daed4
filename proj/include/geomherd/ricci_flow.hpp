#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/curvature.hpp"

namespace geomherd {

// Discrete curvature flow on one snapshot: every iteration rescales each edge
// by its curvature,
//     w <- w * (1 + step_size * kappa),
// so negatively curved edges (bridges) contract toward a neckpinch while
// positively curved ones expand, followed by a global rescale that conserves
// total edge weight. Because the pinch test runs before each update, kappa >=
// pinch_curvature whenever a weight is rescaled, and step_size *
// |pinch_curvature| < 1 keeps every weight positive. The returned clock is
// the first iteration at which the graph develops a singularity (curvature
// below pinch_curvature, or an edge collapsing below min_weight); -1 means no
// singularity within the iteration cap. No surgery is performed.
struct FlowConfig {
    double step_size = 0.1;
    int max_iters = 200;
    double pinch_curvature = -2.0;
    double min_weight = 1e-4;
    bool renormalize = true;
    double alpha = 0.5;  // kernel laziness used by the flow's curvature
};

struct FlowTrace {
    int tau_sing = -1;  // iterations until singularity; -1 sentinel
    bool pinched = false;
    bool degenerate = false;  // no edges to flow
    std::string reason;       // "curvature" | "weight" when pinched
    int pinch_u = -1, pinch_v = -1;
    double final_min_kappa = std::numeric_limits<double>::quiet_NaN();
    // per-iteration diagnostics (index 0 = after the first curvature pass)
    std::vector<double> min_kappa;
    std::vector<double> mean_kappa;
    std::vector<double> min_edge_weight;
    std::vector<double> total_weight;
};

inline FlowTrace ricci_flow_tau(const AgentGraphSnapshot& snap, const FlowConfig& cfg) {
    if (!(cfg.step_size > 0.0) || !(cfg.step_size * std::abs(cfg.pinch_curvature) < 1.0))
        throw std::invalid_argument("flow: need 0 < step_size * |pinch_curvature| < 1");
    if (cfg.max_iters < 1) throw std::invalid_argument("flow: max_iters must be positive");
    FlowTrace res;
    if (snap.edges.empty()) {
        res.degenerate = true;
        return res;
    }

    AgentGraphSnapshot cur = snap;
    double total0 = 0.0;
    for (const auto& e : cur.edges) total0 += e.w;
    CurvatureParams params;
    params.alpha = cfg.alpha;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const auto curv = snapshot_curvature(cur, params);
        double min_kappa = std::numeric_limits<double>::infinity();
        double kappa_sum = 0.0;
        int n_defined = 0;
        int mu = -1, mv = -1;
        for (const auto& e : curv) {
            if (!e.defined) continue;
            ++n_defined;
            kappa_sum += e.kappa;
            if (e.kappa < min_kappa) {
                min_kappa = e.kappa;
                mu = e.u;
                mv = e.v;
            }
        }
        res.final_min_kappa = min_kappa;
        res.min_kappa.push_back(min_kappa);
        res.mean_kappa.push_back(n_defined > 0
                                     ? kappa_sum / n_defined
                                     : std::numeric_limits<double>::quiet_NaN());
        if (min_kappa < cfg.pinch_curvature) {
            res.tau_sing = iter;
            res.pinched = true;
            res.reason = "curvature";
            res.pinch_u = mu;
            res.pinch_v = mv;
            res.min_edge_weight.push_back(res.min_edge_weight.empty()
                                              ? std::numeric_limits<double>::quiet_NaN()
                                              : res.min_edge_weight.back());
            res.total_weight.push_back(res.total_weight.empty()
                                           ? total0
                                           : res.total_weight.back());
            return res;
        }
        double total = 0.0;
        for (std::size_t i = 0; i < cur.edges.size(); ++i) {
            if (curv[i].defined) cur.edges[i].w *= (1.0 + cfg.step_size * curv[i].kappa);
            total += cur.edges[i].w;
        }
        if (cfg.renormalize && total > 0.0) {
            const double scale = total0 / total;
            total = 0.0;
            for (auto& e : cur.edges) {
                e.w *= scale;
                total += e.w;
            }
        }
        double min_w = std::numeric_limits<double>::infinity();
        int wu = -1, wv = -1;
        for (const auto& e : cur.edges)
            if (e.w < min_w) {
                min_w = e.w;
                wu = e.u;
                wv = e.v;
            }
        res.min_edge_weight.push_back(min_w);
        res.total_weight.push_back(total);
        if (min_w < cfg.min_weight) {
            res.tau_sing = iter;
            res.pinched = true;
            res.reason = "weight";
            res.pinch_u = wu;
            res.pinch_v = wv;
            return res;
        }
    }
    return res;  // sentinel -1
}

}  // namespace geomherd
