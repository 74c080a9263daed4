#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geomherd/trajectory.hpp"
#include "geomherd/util.hpp"

namespace geomherd {

enum class EdgeMode { binary_agreement, cosine, knn_heading, jaccard_holdings };

inline std::string to_string(EdgeMode m) {
    switch (m) {
        case EdgeMode::binary_agreement: return "binary_agreement";
        case EdgeMode::cosine: return "cosine";
        case EdgeMode::knn_heading: return "knn_heading";
        case EdgeMode::jaccard_holdings: return "jaccard_holdings";
    }
    return "?";
}

inline EdgeMode edge_mode_from_string(const std::string& s) {
    if (s == "binary_agreement") return EdgeMode::binary_agreement;
    if (s == "cosine") return EdgeMode::cosine;
    if (s == "knn_heading") return EdgeMode::knn_heading;
    if (s == "jaccard_holdings") return EdgeMode::jaccard_holdings;
    throw std::invalid_argument("unknown edge mode: " + s);
}

struct GraphConfig {
    EdgeMode mode = EdgeMode::binary_agreement;
    int window = 100;     // trailing steps feeding each snapshot
    int stride = 10;      // snapshot spacing
    double retain = 0.5;  // agreement threshold for keeping an edge
    int knn = 10;         // neighbours per node in knn_heading mode
};

struct GraphEdge {
    int u = 0, v = 0;  // u < v
    double w = 0.0;    // edge value; doubles as the edge length downstream
};

struct AgentGraphSnapshot {
    int t = 0;  // 1-indexed step at the right edge of the window
    int n = 0;
    bool degenerate = false;  // no retained edges
    std::vector<GraphEdge> edges;
};

// Fraction of window steps on which the two action sequences coincide.
inline double agreement_weight(const std::int8_t* a, const std::int8_t* b, int len) {
    if (len <= 0) throw std::invalid_argument("agreement_weight: empty window");
    int match = 0;
    for (int s = 0; s < len; ++s) match += (a[s] == b[s]);
    return static_cast<double>(match) / len;
}

inline double agreement_weight(const std::vector<std::int8_t>& a,
                               const std::vector<std::int8_t>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("agreement_weight: length mismatch");
    return agreement_weight(a.data(), b.data(), static_cast<int>(a.size()));
}

namespace detail {

inline std::size_t pair_index(int i, int j, int n) {
    // i < j; row-major upper triangle
    return static_cast<std::size_t>(i) * (2 * n - i - 1) / 2 + (j - i - 1);
}

}  // namespace detail

// Dynamic interaction graphs from the action stream. A snapshot is emitted at
// every step t = window, window+stride, ... ; its edges are computed from the
// trailing `window` steps.
//
//  binary_agreement: keep the pair iff its match frequency exceeds `retain`;
//      the retained edge carries the raw (continuous) frequency.
//  cosine: cosine similarity of the one-hot lifted action sequences, which
//      for unit one-hot rows equals the match frequency; all pairs with a
//      positive value are kept (no thresholding).
//  knn_heading: connect each node to its `knn` nearest neighbours by mean
//      circular action-bin distance over the window; edges are unweighted
//      (w = 1).
inline std::vector<AgentGraphSnapshot> build_snapshots(const ActionTrajectory& traj,
                                                       const GraphConfig& cfg) {
    if (cfg.window < 1 || cfg.stride < 1)
        throw std::invalid_argument("graph: window and stride must be positive");
    if (cfg.window > traj.horizon)
        throw std::invalid_argument("graph: window exceeds trajectory horizon");
    if (cfg.mode == EdgeMode::jaccard_holdings)
        throw std::invalid_argument("graph: jaccard_holdings requires a holdings series input");

    const int n = traj.n_agents;
    const std::size_t n_pairs = static_cast<std::size_t>(n) * (n - 1) / 2;
    std::vector<AgentGraphSnapshot> out;

    if (cfg.mode == EdgeMode::binary_agreement || cfg.mode == EdgeMode::cosine) {
        std::vector<std::uint16_t> match(n_pairs, 0);
        auto apply_row = [&](int row, int sign) {
            const std::int8_t* acts = &traj.actions[static_cast<std::size_t>(row) * n];
            std::size_t p = 0;
            for (int i = 0; i < n; ++i) {
                const std::int8_t ai = acts[i];
                for (int j = i + 1; j < n; ++j, ++p)
                    if (ai == acts[j]) match[p] = static_cast<std::uint16_t>(match[p] + sign);
            }
        };
        for (int row = 0; row < cfg.window; ++row) apply_row(row, +1);
        for (int t = cfg.window; t <= traj.horizon; t += cfg.stride) {
            AgentGraphSnapshot snap;
            snap.t = t;
            snap.n = n;
            std::size_t p = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j, ++p) {
                    const double w = static_cast<double>(match[p]) / cfg.window;
                    const bool keep = cfg.mode == EdgeMode::binary_agreement
                                          ? (w > cfg.retain)
                                          : (w > 0.0);
                    if (keep) snap.edges.push_back({i, j, w});
                }
            snap.degenerate = snap.edges.empty();
            out.push_back(std::move(snap));
            if (t + cfg.stride > traj.horizon) break;
            for (int row = t - cfg.window; row < t - cfg.window + cfg.stride; ++row)
                apply_row(row, -1);
            for (int row = t; row < t + cfg.stride; ++row) apply_row(row, +1);
        }
        return out;
    }

    // knn_heading
    const int bins = traj.alphabet;
    const int half = bins / 2;
    for (int t = cfg.window; t <= traj.horizon; t += cfg.stride) {
        std::vector<double> dist(n_pairs, 0.0);
        for (int row = t - cfg.window; row < t; ++row) {
            const std::int8_t* acts = &traj.actions[static_cast<std::size_t>(row) * n];
            std::size_t p = 0;
            for (int i = 0; i < n; ++i) {
                const int bi = acts[i] - traj.action_min;
                for (int j = i + 1; j < n; ++j, ++p) {
                    int d = std::abs(bi - (acts[j] - traj.action_min));
                    if (d > half) d = bins - d;
                    dist[p] += d;
                }
            }
        }
        AgentGraphSnapshot snap;
        snap.t = t;
        snap.n = n;
        std::vector<std::pair<double, int>> cand(n - 1);
        std::vector<std::uint8_t> picked(n_pairs, 0);
        const int k = std::min(cfg.knn, n - 1);
        for (int i = 0; i < n; ++i) {
            int c = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const std::size_t p = i < j ? detail::pair_index(i, j, n)
                                            : detail::pair_index(j, i, n);
                cand[c++] = {dist[p], j};
            }
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
            for (int s = 0; s < k; ++s) {
                const int j = cand[s].second;
                const std::size_t p = i < j ? detail::pair_index(i, j, n)
                                            : detail::pair_index(j, i, n);
                picked[p] = 1;
            }
        }
        std::size_t p = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j, ++p)
                if (picked[p]) snap.edges.push_back({i, j, 1.0});
        snap.degenerate = snap.edges.empty();
        out.push_back(std::move(snap));
    }
    return out;
}

// --- synthetic fund-holdings input (jaccard_holdings mode) ------------------

struct HoldingsSeries {
    int n_funds = 0;
    // periods[p][f] = position ids held by fund f in period p
    std::vector<std::vector<std::vector<int>>> periods;
};

inline std::vector<AgentGraphSnapshot> build_jaccard_snapshots(const HoldingsSeries& h,
                                                               int window = 4) {
    if (window < 1) throw std::invalid_argument("jaccard: window must be positive");
    if (static_cast<int>(h.periods.size()) < window)
        throw std::invalid_argument("jaccard: fewer periods than the window");
    std::vector<AgentGraphSnapshot> out;
    const int n = h.n_funds;
    for (int p = window; p <= static_cast<int>(h.periods.size()); ++p) {
        std::vector<std::vector<int>> sets(n);
        for (int f = 0; f < n; ++f) {
            std::vector<int> acc;
            for (int q = p - window; q < p; ++q) {
                const auto& pos = h.periods[q].at(f);
                acc.insert(acc.end(), pos.begin(), pos.end());
            }
            std::sort(acc.begin(), acc.end());
            acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
            sets[f] = std::move(acc);
        }
        AgentGraphSnapshot snap;
        snap.t = p;
        snap.n = n;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const auto& A = sets[i];
                const auto& B = sets[j];
                std::size_t ia = 0, ib = 0, inter = 0;
                while (ia < A.size() && ib < B.size()) {
                    if (A[ia] == B[ib]) {
                        ++inter;
                        ++ia;
                        ++ib;
                    } else if (A[ia] < B[ib]) {
                        ++ia;
                    } else {
                        ++ib;
                    }
                }
                const std::size_t uni = A.size() + B.size() - inter;
                if (uni > 0 && inter > 0)
                    snap.edges.push_back({i, j, static_cast<double>(inter) / uni});
            }
        snap.degenerate = snap.edges.empty();
        out.push_back(std::move(snap));
    }
    return out;
}

inline HoldingsSeries load_holdings(const std::string& path) {
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.value("schema", "") != "geomherd.holdings/1")
        throw std::runtime_error("holdings: unknown schema in " + path);
    HoldingsSeries h;
    h.n_funds = j.at("n_funds").get<int>();
    for (const auto& period : j.at("periods")) {
        if (static_cast<int>(period.size()) != h.n_funds)
            throw std::runtime_error("holdings: period with wrong fund count in " + path);
        h.periods.push_back(period.get<std::vector<std::vector<int>>>());
    }
    return h;
}

// --- snapshot files ----------------------------------------------------------
// One JSON document per snapshot: snap_<t padded>.json inside a directory.

inline std::string snapshot_filename(int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snap_%06d.json", t);
    return buf;
}

inline void save_snapshots(const std::vector<AgentGraphSnapshot>& snaps,
                           const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& s : snaps) {
        nlohmann::ordered_json j;
        j["schema"] = "geomherd.snapshot/1";
        j["t"] = s.t;
        j["n"] = s.n;
        j["degenerate"] = s.degenerate;
        auto edges = nlohmann::ordered_json::array();
        for (const auto& e : s.edges) edges.push_back({e.u, e.v, e.w});
        j["edges"] = std::move(edges);
        write_file(dir + "/" + snapshot_filename(s.t), j.dump() + "\n");
    }
}

inline std::vector<AgentGraphSnapshot> load_snapshots(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("snap_", 0) == 0 && name.size() > 5 && entry.path().extension() == ".json")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("snapshots: none found in " + dir);
    std::vector<AgentGraphSnapshot> out;
    for (const auto& f : files) {
        const auto j = nlohmann::json::parse(read_file(f));
        if (j.value("schema", "") != "geomherd.snapshot/1")
            throw std::runtime_error("snapshots: unknown schema in " + f);
        AgentGraphSnapshot s;
        s.t = j.at("t").get<int>();
        s.n = j.at("n").get<int>();
        s.degenerate = j.at("degenerate").get<bool>();
        for (const auto& e : j.at("edges"))
            s.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace geomherd
