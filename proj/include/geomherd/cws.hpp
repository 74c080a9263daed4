#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "geomherd/rng.hpp"
#include "geomherd/trajectory.hpp"

namespace geomherd {

// Coupled-spin market substrate. Each agent carries a continuous spin updated
// against the population mean field,
//     s_i(t+1) = tanh(coupling(t) * M(t) + g_i + eps_i(t)),
// where g_i is a persistent private signal drawn once per agent and eps is
// redrawn every step. Actions are thresholded spins; asset log-prices move
// with the mean action plus idiosyncratic noise. The coupling follows a
// linear ramp from `coupling_base` to `coupling` so that the ordering
// transition happens mid-trajectory instead of at t=0; setting
// coupling_base == coupling recovers a constant coupling.
struct CwsConfig {
    int n_agents = 66;
    int n_assets = 4;
    double coupling = 1.0;       // post-ramp coupling; supercritical iff > 1
    double coupling_base = 0.6;  // pre-ramp coupling
    int ramp_start = -1;         // first ramp step; -1 = 40% of horizon
    int ramp_end = -1;           // last ramp step;  -1 = 90% of horizon
    double signal_std = 0.4;     // persistent per-agent signal scale
    double noise_std = 0.69;     // per-step idiosyncratic noise scale
    double theta_action = 0.33;  // spin threshold for buy/sell
    double impact_coeff = 0.5;   // mean-action price impact
    double beta_spread = 0.6;    // per-asset impact multipliers span mean +/- spread/2
    double sigma_xi = 0.01;      // idiosyncratic return noise
    double initial_price = 100.0;
    double theta_event = 0.5;    // |M| level defining the herding event
    int horizon = 1000;
    std::uint64_t seed = 1;
};

inline double cws_coupling_at(const CwsConfig& cfg, int step) {
    const int rs = cfg.ramp_start > 0 ? cfg.ramp_start : static_cast<int>(0.4 * cfg.horizon);
    const int re = cfg.ramp_end > 0 ? cfg.ramp_end : static_cast<int>(0.9 * cfg.horizon);
    if (re <= rs || step <= rs) return step > rs ? cfg.coupling : cfg.coupling_base;
    if (step >= re) return cfg.coupling;
    const double frac = static_cast<double>(step - rs) / (re - rs);
    return cfg.coupling_base + (cfg.coupling - cfg.coupling_base) * frac;
}

inline ActionTrajectory simulate_cws(const CwsConfig& cfg) {
    if (cfg.n_agents < 2) throw std::invalid_argument("cws: need at least 2 agents");
    if (cfg.horizon < 1) throw std::invalid_argument("cws: horizon must be positive");
    if (!(cfg.theta_action > 0.0)) throw std::invalid_argument("cws: theta_action must be positive");

    ActionTrajectory traj;
    traj.substrate = "cws";
    traj.n_agents = cfg.n_agents;
    traj.horizon = cfg.horizon;
    traj.alphabet = 3;
    traj.action_min = -1;
    traj.event_threshold = cfg.theta_event;
    traj.label = cfg.coupling > 1.0 ? "supercritical" : "subcritical";
    traj.actions.resize(static_cast<std::size_t>(cfg.horizon) * cfg.n_agents);
    traj.order_param.resize(cfg.horizon);
    traj.prices.assign(cfg.horizon, std::vector<double>(cfg.n_assets, 0.0));

    Rng rng_signal(mix_key(cfg.seed, 0xA1));
    Rng rng_noise(mix_key(cfg.seed, 0xA2));
    Rng rng_price(mix_key(cfg.seed, 0xA3));

    std::vector<double> g(cfg.n_agents);
    for (double& x : g) x = rng_signal.normal(0.0, cfg.signal_std);

    // per-asset impact multipliers, evenly spread with mean exactly 1
    std::vector<double> beta(cfg.n_assets, 1.0);
    if (cfg.n_assets > 1)
        for (int a = 0; a < cfg.n_assets; ++a)
            beta[a] = 1.0 - 0.5 * cfg.beta_spread +
                      cfg.beta_spread * a / (cfg.n_assets - 1.0);

    std::vector<double> spin(cfg.n_agents, 0.0);
    std::vector<double> logp(cfg.n_assets, std::log(cfg.initial_price));
    double mean_field = 0.0;  // M(0) with all spins at rest

    for (int t = 1; t <= cfg.horizon; ++t) {
        const double coupling = cws_coupling_at(cfg, t);
        double sum = 0.0;
        for (int i = 0; i < cfg.n_agents; ++i) {
            const double eps = rng_noise.normal(0.0, cfg.noise_std);
            spin[i] = std::tanh(coupling * mean_field + g[i] + eps);
            sum += spin[i];
        }
        mean_field = sum / cfg.n_agents;
        if (!std::isfinite(mean_field))
            throw std::runtime_error("cws: non-finite state at step " + std::to_string(t));

        const int row = t - 1;
        for (int i = 0; i < cfg.n_agents; ++i) {
            std::int8_t a = 0;
            if (spin[i] > cfg.theta_action)
                a = 1;
            else if (spin[i] < -cfg.theta_action)
                a = -1;
            traj.actions[static_cast<std::size_t>(row) * cfg.n_agents + i] = a;
        }
        traj.order_param[row] = std::abs(mean_field);
        for (int a = 0; a < cfg.n_assets; ++a) {
            const double r = cfg.impact_coeff * beta[a] * mean_field + rng_price.normal(0.0, cfg.sigma_xi);
            logp[a] += r;
            const double price = std::exp(logp[a]);
            if (!std::isfinite(price))
                throw std::runtime_error("cws: non-finite price at step " + std::to_string(t));
            traj.prices[row][a] = price;
        }
        if (!traj.event_time && traj.order_param[row] > cfg.theta_event) traj.event_time = t;
    }
    derive_returns(traj, cfg.initial_price);

    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "cws-k%.2f-s%03llu", cfg.coupling,
                  static_cast<unsigned long long>(cfg.seed));
    traj.id = idbuf;
    traj.meta = {{"substrate", "cws"},
                 {"n_agents", cfg.n_agents},
                 {"n_assets", cfg.n_assets},
                 {"coupling", cfg.coupling},
                 {"coupling_base", cfg.coupling_base},
                 {"ramp_start", cfg.ramp_start},
                 {"ramp_end", cfg.ramp_end},
                 {"signal_std", cfg.signal_std},
                 {"noise_std", cfg.noise_std},
                 {"theta_action", cfg.theta_action},
                 {"impact_coeff", cfg.impact_coeff},
                 {"beta_spread", cfg.beta_spread},
                 {"sigma_xi", cfg.sigma_xi},
                 {"initial_price", cfg.initial_price},
                 {"theta_event", cfg.theta_event},
                 {"horizon", cfg.horizon},
                 {"seed", cfg.seed}};
    return traj;
}

}  // namespace geomherd
