#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/graph.hpp"
#include "geomherd/transport.hpp"

namespace geomherd {

// Adjacency view over a snapshot; the edge value is used both as the random
// walk's affinity (kernel mass) and as the edge length of the metric.
struct SnapshotView {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> nbrs;  // node -> (neighbour, w)

    SnapshotView() = default;
    explicit SnapshotView(const AgentGraphSnapshot& snap) : n(snap.n), nbrs(snap.n) {
        for (const auto& e : snap.edges) {
            if (e.u < 0 || e.v < 0 || e.u >= snap.n || e.v >= snap.n || e.u == e.v)
                throw std::invalid_argument("snapshot: bad edge endpoints");
            if (!(e.w > 0.0) || !std::isfinite(e.w))
                throw std::invalid_argument("snapshot: edge value must be positive and finite");
            nbrs[e.u].emplace_back(e.v, e.w);
            nbrs[e.v].emplace_back(e.u, e.w);
        }
    }
};

// Shortest-path metric with edge lengths equal to the edge values. Rows are
// computed on demand (one Dijkstra per requested source) and cached, so a
// sparse snapshot only ever pays for the sources its kernels actually touch.
// Not thread-safe; intended for single-threaded use per snapshot.
class DistanceProvider {
public:
    explicit DistanceProvider(const SnapshotView& view) : view_(&view), rows_(view.n) {}

    static constexpr double kUnreachable = std::numeric_limits<double>::infinity();

    const std::vector<double>& row(int src) const {
        auto& r = rows_.at(src);
        if (r.empty()) {
            r.assign(view_->n, kUnreachable);
            using Item = std::pair<double, int>;
            std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
            r[src] = 0.0;
            heap.push({0.0, src});
            while (!heap.empty()) {
                const auto [d, u] = heap.top();
                heap.pop();
                if (d > r[u]) continue;
                for (const auto& [v, w] : view_->nbrs[u]) {
                    const double nd = d + w;
                    if (nd < r[v]) {
                        r[v] = nd;
                        heap.push({nd, v});
                    }
                }
            }
        }
        return r;
    }

    double operator()(int u, int v) const {
        if (u == v) return 0.0;
        if (!rows_[u].empty()) return rows_[u][v];
        if (!rows_[v].empty()) return rows_[v][u];
        return row(u)[v];
    }

private:
    const SnapshotView* view_;
    mutable std::vector<std::vector<double>> rows_;
};

// Lazy random-walk kernel: alpha stays put, the rest spreads over neighbours
// proportionally to the edge value.
struct LazyKernel {
    int center = 0;
    std::vector<int> support;   // center first, then neighbours
    std::vector<double> mass;   // aligned with support; sums to 1
};

inline LazyKernel lazy_kernel(const SnapshotView& view, int node, double alpha) {
    if (node < 0 || node >= view.n) throw std::invalid_argument("kernel: node out of range");
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw std::invalid_argument("kernel: alpha must lie in [0,1)");
    const auto& nb = view.nbrs[node];
    if (nb.empty())
        throw std::invalid_argument("kernel: node " + std::to_string(node) + " is isolated");
    double total = 0.0;
    for (const auto& [v, w] : nb) total += w;
    LazyKernel k;
    k.center = node;
    k.support.reserve(nb.size() + 1);
    k.mass.reserve(nb.size() + 1);
    k.support.push_back(node);
    k.mass.push_back(alpha);
    for (const auto& [v, w] : nb) {
        k.support.push_back(v);
        k.mass.push_back((1.0 - alpha) * w / total);
    }
    if (alpha == 0.0) {
        k.support.erase(k.support.begin());
        k.mass.erase(k.mass.begin());
    }
    return k;
}

enum class TransportSolver { exact_lp, sinkhorn };

struct CurvatureParams {
    double alpha = 0.5;        // kernel laziness
    double kappa_pos = 0.1;    // strictly above -> positively curved
    double kappa_neg = -0.1;   // strictly below -> negatively curved
    TransportSolver solver = TransportSolver::exact_lp;
    double sinkhorn_reg = 0.05;
};

struct EdgeCurvature {
    int u = 0, v = 0;
    double w1 = 0.0;
    double dist = 0.0;   // metric distance between the endpoints
    double kappa = 0.0;  // 1 - w1/dist
    bool defined = true;
};

inline double kernel_w1(const LazyKernel& a, const LazyKernel& b,
                        const DistanceProvider& metric, const CurvatureParams& params) {
    if (params.solver == TransportSolver::exact_lp)
        return wasserstein1(a.support, a.mass, b.support, b.mass,
                            [&](int u, int v) { return metric(u, v); });
    // entropic variant: no common-mass cancellation so the regularised plan
    // sees the full marginals
    std::vector<double> cost(a.support.size() * b.support.size());
    for (std::size_t i = 0; i < a.support.size(); ++i)
        for (std::size_t j = 0; j < b.support.size(); ++j) {
            const double d = metric(a.support[i], b.support[j]);
            if (!std::isfinite(d))
                throw std::domain_error("sinkhorn: supports not mutually reachable");
            cost[i * b.support.size() + j] = d;
        }
    return sinkhorn_cost(a.mass, b.mass, cost, params.sinkhorn_reg);
}

// Coarse curvature of one edge. Undefined (rather than an error) when the two
// kernels cannot see each other through the metric or the endpoints coincide
// metrically.
inline EdgeCurvature edge_curvature(const SnapshotView& view, const DistanceProvider& metric,
                                    const GraphEdge& e, const CurvatureParams& params) {
    EdgeCurvature out;
    out.u = e.u;
    out.v = e.v;
    const double d = metric(e.u, e.v);
    if (!std::isfinite(d) || !(d > 0.0)) {
        out.defined = false;
        return out;
    }
    const LazyKernel ka = lazy_kernel(view, e.u, params.alpha);
    const LazyKernel kb = lazy_kernel(view, e.v, params.alpha);
    // reachability pre-check so the undefined case stays a data condition
    for (int s : ka.support)
        for (int t : kb.support)
            if (!std::isfinite(metric(s, t))) {
                out.defined = false;
                return out;
            }
    out.dist = d;
    out.w1 = kernel_w1(ka, kb, metric, params);
    out.kappa = 1.0 - out.w1 / d;
    return out;
}

inline std::vector<EdgeCurvature> snapshot_curvature(const AgentGraphSnapshot& snap,
                                                     const CurvatureParams& params) {
    SnapshotView view(snap);
    DistanceProvider metric(view);
    std::vector<EdgeCurvature> out;
    out.reserve(snap.edges.size());
    for (const auto& e : snap.edges) out.push_back(edge_curvature(view, metric, e, params));
    return out;
}

// Sign decomposition over one snapshot's edge set. Undefined edges are
// excluded from every numerator and denominator.
struct CurvatureSummary {
    double mean_all = std::numeric_limits<double>::quiet_NaN();
    double mean_pos = std::numeric_limits<double>::quiet_NaN();
    double frac_neg = std::numeric_limits<double>::quiet_NaN();
    int n_edges = 0;      // edges in the snapshot, defined or not
    int n_defined = 0;
    int n_pos = 0;        // kappa strictly above kappa_pos
    int n_neg = 0;        // kappa strictly below kappa_neg
    int n_undefined = 0;
    bool has_pos = false;
};

inline CurvatureSummary summarize(const std::vector<EdgeCurvature>& edges,
                                  const CurvatureParams& params) {
    CurvatureSummary s;
    s.n_edges = static_cast<int>(edges.size());
    double sum_all = 0.0, sum_pos = 0.0;
    for (const auto& e : edges) {
        if (!e.defined) {
            ++s.n_undefined;
            continue;
        }
        ++s.n_defined;
        sum_all += e.kappa;
        if (e.kappa > params.kappa_pos) {
            ++s.n_pos;
            sum_pos += e.kappa;
        } else if (e.kappa < params.kappa_neg) {
            ++s.n_neg;
        }
    }
    if (s.n_defined > 0) {
        s.mean_all = sum_all / s.n_defined;
        s.frac_neg = static_cast<double>(s.n_neg) / s.n_defined;
    }
    if (s.n_pos > 0) {
        s.mean_pos = sum_pos / s.n_pos;
        s.has_pos = true;
    }
    return s;
}

}  // namespace geomherd
