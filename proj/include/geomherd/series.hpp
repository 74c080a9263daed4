#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/curvature.hpp"
#include "geomherd/detectors.hpp"
#include "geomherd/graph.hpp"
#include "geomherd/parallel.hpp"
#include "geomherd/ricci_flow.hpp"
#include "geomherd/trajectory.hpp"
#include "geomherd/util.hpp"
#include "geomherd/veff.hpp"

namespace geomherd {

// A feature table is the bridge between geometry and detection: one row per
// snapshot time, one column per scalar signal, NaN marking values that were
// not computed (degenerate snapshot, flow stride, edge cap). Tables
// round-trip through CSV byte-identically.

struct FeatureTable {
    std::vector<std::string> columns;            // first column is "t"
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) return static_cast<int>(j);
        throw std::invalid_argument("feature table: no column named '" + name + "'");
    }
};

inline void save_table(const std::string& path, const FeatureTable& table) {
    std::string out;
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        if (j) out += ',';
        out += table.columns[j];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::invalid_argument("feature table: ragged row");
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += fmt_double(row[j]);
        }
        out += '\n';
    }
    write_file(path, out);
}

inline FeatureTable load_table(const std::string& path) {
    const std::string text = read_file(path);
    FeatureTable table;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const auto parts = split(line, ',');
        if (header) {
            table.columns = parts;
            header = false;
            continue;
        }
        if (parts.size() != table.columns.size())
            throw std::runtime_error("feature table: bad row width in " + path);
        std::vector<double> row;
        row.reserve(parts.size());
        for (const auto& p : parts) row.push_back(std::stod(p));
        table.rows.push_back(std::move(row));
    }
    if (table.columns.empty() || table.columns[0] != "t")
        throw std::runtime_error("feature table: first column must be t in " + path);
    return table;
}

inline std::vector<SeriesSample> table_series(const FeatureTable& table,
                                              const std::string& column) {
    const int j = table.column_index(column);
    std::vector<SeriesSample> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows)
        out.push_back({static_cast<int>(row[0]), row[static_cast<std::size_t>(j)]});
    return out;
}

// Singularity-iteration series for detection: the flow reports -1 when no
// pinch occurred within its budget; that right-censors the series at
// max_iters so "no singularity yet" sits at the top of the scale and an
// approaching one pulls the value down. NaN (flow not run) stays missing.
inline std::vector<SeriesSample> tau_sing_series(const FeatureTable& table, int max_iters) {
    auto raw = table_series(table, "tau_sing");
    for (auto& s : raw)
        if (std::isfinite(s.x) && s.x < 0.0) s.x = static_cast<double>(max_iters);
    return raw;
}

struct SeriesConfig {
    CurvatureParams curvature;
    bool with_flow = false;
    FlowConfig flow;
    int flow_stride = 1;      // run the flow on every k-th snapshot
    int flow_max_edges = 0;   // skip flow on snapshots larger than this (0 = no cap)
    bool with_veff = false;
    VeffConfig veff;
};

// Column layout: a fixed 8-column core, with tau_sing appended when the flow
// runs and v_eff appended when the vocabulary series runs.
inline std::vector<std::string> feature_columns(bool with_flow, bool with_veff) {
    std::vector<std::string> cols = {"t",       "mean_all", "mean_pos", "frac_neg",
                                     "n_edges", "n_pos",    "n_neg",    "n_undefined"};
    if (with_flow) cols.push_back("tau_sing");
    if (with_veff) cols.push_back("v_eff");
    return cols;
}

// Per-snapshot geometry signals, computed independently per snapshot (and in
// parallel when workers allow). Degenerate or empty snapshots yield a row of
// NaN with the edge count preserved. tau_sing holds the flow's singularity
// iteration (-1 = no singularity within budget) and NaN where the flow was
// skipped by stride or the edge cap.
inline FeatureTable build_feature_table(const std::vector<AgentGraphSnapshot>& snapshots,
                                        const ActionTrajectory* traj,
                                        const SeriesConfig& cfg) {
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    FeatureTable table;
    table.columns = feature_columns(cfg.with_flow, cfg.with_veff);
    table.rows.assign(snapshots.size(),
                      std::vector<double>(table.columns.size(), kNaN));

    if (cfg.with_flow && cfg.flow_stride < 1)
        throw std::invalid_argument("feature table: flow_stride must be >= 1");
    const int tau_col = cfg.with_flow ? 8 : -1;
    const int veff_col = cfg.with_flow ? 9 : 8;

    parallel_for(snapshots.size(), [&](std::size_t i) {
        const auto& snap = snapshots[i];
        auto& row = table.rows[i];
        row[0] = static_cast<double>(snap.t);
        row[4] = static_cast<double>(snap.edges.size());
        if (snap.degenerate || snap.edges.empty()) return;

        const auto edges = snapshot_curvature(snap, cfg.curvature);
        const CurvatureSummary sum = summarize(edges, cfg.curvature);
        row[1] = sum.mean_all;
        row[2] = sum.has_pos ? sum.mean_pos : kNaN;
        row[3] = sum.frac_neg;
        row[5] = static_cast<double>(sum.n_pos);
        row[6] = static_cast<double>(sum.n_neg);
        row[7] = static_cast<double>(sum.n_undefined);

        if (cfg.with_flow && i % static_cast<std::size_t>(cfg.flow_stride) == 0 &&
            (cfg.flow_max_edges <= 0 ||
             static_cast<int>(snap.edges.size()) <= cfg.flow_max_edges)) {
            FlowConfig fc = cfg.flow;
            fc.alpha = cfg.curvature.alpha;
            const FlowTrace fr = ricci_flow_tau(snap, fc);
            row[static_cast<std::size_t>(tau_col)] = static_cast<double>(fr.tau_sing);
        }
    });

    if (cfg.with_veff) {
        if (!traj) throw std::invalid_argument("feature table: veff requires the trajectory");
        // align to the snapshot grid
        if (!snapshots.empty()) {
            GraphConfig grid;
            grid.window = snapshots.front().t;
            grid.stride = snapshots.size() > 1
                              ? snapshots[1].t - snapshots[0].t
                              : 1;
            const auto pts = veff_series(*traj, grid, cfg.veff);
            if (pts.size() != snapshots.size())
                throw std::logic_error("feature table: veff grid misaligned");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (pts[i].t != snapshots[i].t)
                    throw std::logic_error("feature table: veff grid misaligned");
                table.rows[i][static_cast<std::size_t>(veff_col)] = pts[i].veff;
            }
        }
    }
    return table;
}

}  // namespace geomherd
