#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomherd/detectors.hpp"
#include "geomherd/eval.hpp"

namespace geomherd {

// Operating-point sweep: rerun one detector across a (slack, threshold) grid
// on a fixed pool of labelled series and report the recall/false-alarm/lead
// trade-off per cell. Two cells are the named operating points used
// elsewhere: (0.5, 4.0) favours recall, (2.0, 4.0) favours precision.

struct LabelledSeries {
    std::string id;
    bool positive = false;
    int event_time = -1;  // -1 when no event realised
    std::vector<SeriesSample> samples;
};

struct SweepCell {
    double k_sigma = 0.0;
    double h_sigma = 0.0;
    PooledMetrics metrics;
};

struct SweepResult {
    std::vector<double> k_grid;
    std::vector<double> h_grid;
    std::vector<SweepCell> cells;  // row-major: k outer, h inner
};

inline std::vector<double> default_k_grid() { return {0.25, 0.5, 1.0, 1.5, 2.0}; }
inline std::vector<double> default_h_grid() { return {2.0, 3.0, 4.0, 5.0, 6.0}; }

inline SweepResult calibration_sweep(const std::vector<LabelledSeries>& pool,
                                     const DetectorConfig& base,
                                     std::vector<double> k_grid = default_k_grid(),
                                     std::vector<double> h_grid = default_h_grid(),
                                     int n_boot = 2000, std::uint64_t seed = 31) {
    SweepResult out;
    out.k_grid = std::move(k_grid);
    out.h_grid = std::move(h_grid);
    out.cells.reserve(out.k_grid.size() * out.h_grid.size());
    for (double k : out.k_grid) {
        for (double h : out.h_grid) {
            DetectorConfig cfg = base;
            cfg.k_sigma = k;
            cfg.h_sigma = h;
            std::vector<TrajectoryOutcome> outcomes;
            outcomes.reserve(pool.size());
            for (const auto& s : pool) {
                const AlarmRecord alarm = run_detector(s.samples, cfg);
                outcomes.push_back(score_trajectory(s.id, s.positive, s.event_time, alarm));
            }
            SweepCell cell;
            cell.k_sigma = k;
            cell.h_sigma = h;
            cell.metrics = pool_outcomes(outcomes, n_boot, mix_key(seed, std::uint64_t(
                                                             out.cells.size())));
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

}  // namespace geomherd
