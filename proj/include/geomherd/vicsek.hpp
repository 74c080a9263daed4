#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/rng.hpp"
#include "geomherd/trajectory.hpp"

namespace geomherd {

// Point-particle flocking substrate on a periodic square box. Every step each
// particle aligns to the mean heading of all neighbours within `radius`
// (itself included) plus uniform angular noise in [-noise/2, +noise/2], then
// moves at constant speed. Headings are quantised into `heading_bins` equal
// angular sectors to form the discrete action stream.
struct VicsekConfig {
    int n_agents = 600;
    double box = 24.0;
    double radius = 1.0;
    double speed = 0.5;
    double noise = 1.0;  // eta; ordered label iff noise < label_threshold
    double label_threshold = 1.6;
    int heading_bins = 8;
    double theta_event = 0.5;  // polarisation level defining the event
    int warmup = 50;           // steps ignored by the event rule
    int consecutive = 3;       // required consecutive threshold crossings
    int snapshot_stride = 50;  // graph-snapshot spacing used downstream
    int horizon = 1000;
    std::uint64_t seed = 1;
};

inline ActionTrajectory simulate_vicsek(const VicsekConfig& cfg) {
    if (cfg.n_agents < 2) throw std::invalid_argument("vicsek: need at least 2 agents");
    if (cfg.horizon < 1) throw std::invalid_argument("vicsek: horizon must be positive");
    if (cfg.heading_bins < 2 || cfg.heading_bins > 10)
        throw std::invalid_argument("vicsek: heading_bins must be in [2,10]");
    if (!(cfg.box > 2.0 * cfg.radius))
        throw std::invalid_argument("vicsek: box must exceed twice the interaction radius");

    const int n = cfg.n_agents;
    const double L = cfg.box;
    const double two_pi = 2.0 * std::numbers::pi;

    ActionTrajectory traj;
    traj.substrate = "vicsek";
    traj.n_agents = n;
    traj.horizon = cfg.horizon;
    traj.alphabet = cfg.heading_bins;
    traj.action_min = 0;
    traj.event_threshold = cfg.theta_event;
    traj.label = cfg.noise < cfg.label_threshold ? "ordered" : "disordered";
    traj.actions.resize(static_cast<std::size_t>(cfg.horizon) * n);
    traj.order_param.resize(cfg.horizon);

    Rng rng_init(mix_key(cfg.seed, 0xB1));
    Rng rng_noise(mix_key(cfg.seed, 0xB2));

    std::vector<double> x(n), y(n), theta(n), cos_t(n), sin_t(n), new_theta(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng_init.uniform(0.0, L);
        y[i] = rng_init.uniform(0.0, L);
        theta[i] = rng_init.uniform(-std::numbers::pi, std::numbers::pi);
    }

    // cell lists sized to the interaction radius
    const int n_cells = std::max(1, static_cast<int>(L / cfg.radius));
    const double cell_w = L / n_cells;
    std::vector<std::vector<int>> cells(static_cast<std::size_t>(n_cells) * n_cells);
    const double r2 = cfg.radius * cfg.radius;

    int run = 0;  // consecutive steps above the event threshold
    for (int t = 1; t <= cfg.horizon; ++t) {
        for (auto& c : cells) c.clear();
        for (int i = 0; i < n; ++i) {
            cos_t[i] = std::cos(theta[i]);
            sin_t[i] = std::sin(theta[i]);
            int cx = static_cast<int>(x[i] / cell_w);
            int cy = static_cast<int>(y[i] / cell_w);
            if (cx >= n_cells) cx = n_cells - 1;
            if (cy >= n_cells) cy = n_cells - 1;
            cells[static_cast<std::size_t>(cy) * n_cells + cx].push_back(i);
        }
        for (int i = 0; i < n; ++i) {
            const int cx = std::min(n_cells - 1, static_cast<int>(x[i] / cell_w));
            const int cy = std::min(n_cells - 1, static_cast<int>(y[i] / cell_w));
            double sc = 0.0, ss = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int gx = (cx + dx + n_cells) % n_cells;
                    const int gy = (cy + dy + n_cells) % n_cells;
                    for (int j : cells[static_cast<std::size_t>(gy) * n_cells + gx]) {
                        double ddx = std::abs(x[j] - x[i]);
                        double ddy = std::abs(y[j] - y[i]);
                        if (ddx > 0.5 * L) ddx = L - ddx;
                        if (ddy > 0.5 * L) ddy = L - ddy;
                        if (ddx * ddx + ddy * ddy <= r2) {
                            sc += cos_t[j];
                            ss += sin_t[j];
                        }
                    }
                }
            new_theta[i] = std::atan2(ss, sc) + rng_noise.uniform(-0.5 * cfg.noise, 0.5 * cfg.noise);
        }
        double px = 0.0, py = 0.0;
        const int row = t - 1;
        for (int i = 0; i < n; ++i) {
            // wrap heading into [-pi, pi)
            double h = std::remainder(new_theta[i], two_pi);
            if (h >= std::numbers::pi) h -= two_pi;
            theta[i] = h;
            x[i] += cfg.speed * std::cos(h);
            y[i] += cfg.speed * std::sin(h);
            x[i] -= L * std::floor(x[i] / L);
            y[i] -= L * std::floor(y[i] / L);
            px += std::cos(h);
            py += std::sin(h);
            int bin = static_cast<int>((h + std::numbers::pi) / (two_pi / cfg.heading_bins));
            if (bin >= cfg.heading_bins) bin = cfg.heading_bins - 1;
            if (bin < 0) bin = 0;
            traj.actions[static_cast<std::size_t>(row) * n + i] = static_cast<std::int8_t>(bin);
        }
        const double pol = std::sqrt(px * px + py * py) / n;
        if (!std::isfinite(pol))
            throw std::runtime_error("vicsek: non-finite state at step " + std::to_string(t));
        traj.order_param[row] = pol;
        if (t > cfg.warmup && pol > cfg.theta_event) {
            if (++run >= cfg.consecutive && !traj.event_time)
                traj.event_time = t - cfg.consecutive + 1;
        } else {
            run = 0;
        }
    }

    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "vicsek-e%.2f-s%03llu", cfg.noise,
                  static_cast<unsigned long long>(cfg.seed));
    traj.id = idbuf;
    traj.meta = {{"substrate", "vicsek"},
                 {"n_agents", cfg.n_agents},
                 {"box", cfg.box},
                 {"radius", cfg.radius},
                 {"speed", cfg.speed},
                 {"noise", cfg.noise},
                 {"label_threshold", cfg.label_threshold},
                 {"heading_bins", cfg.heading_bins},
                 {"theta_event", cfg.theta_event},
                 {"warmup", cfg.warmup},
                 {"consecutive", cfg.consecutive},
                 {"snapshot_stride", cfg.snapshot_stride},
                 {"horizon", cfg.horizon},
                 {"seed", cfg.seed}};
    return traj;
}

}  // namespace geomherd
