#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geomherd/util.hpp"

namespace geomherd {

// One simulated run: per-step discrete actions for every agent plus the
// aggregate series the detectors and baselines consume. Steps are 1-indexed
// everywhere that a step number is visible (files, event times, snapshot
// times); in-memory rows are 0-indexed.
struct ActionTrajectory {
    std::string id;
    std::string substrate;  // "cws" | "vicsek"
    int n_agents = 0;
    int horizon = 0;
    int alphabet = 3;     // number of distinct action values
    int action_min = -1;  // smallest action value (cws: -1=sell, vicsek: bin 0)

    std::vector<std::int8_t> actions;  // row-major [horizon][n_agents]
    std::vector<double> order_param;   // V_a, one per step
    std::vector<std::vector<double>> prices;         // [horizon][n_assets]
    std::vector<std::vector<double>> asset_returns;  // log-return rows
    std::vector<double> market_return;               // cross-asset mean per step

    std::optional<int> event_time;  // first step with V_a above threshold
    double event_threshold = 0.5;
    std::string label;  // supercritical/subcritical or ordered/disordered
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    std::int8_t action(int step_row, int agent) const {
        return actions[static_cast<std::size_t>(step_row) * n_agents + agent];
    }
    int n_assets() const { return prices.empty() ? 0 : static_cast<int>(prices[0].size()); }
};

inline void derive_returns(ActionTrajectory& traj, double initial_price) {
    const int na = traj.n_assets();
    traj.asset_returns.assign(traj.horizon, std::vector<double>(na, 0.0));
    traj.market_return.assign(traj.horizon, 0.0);
    for (int t = 0; t < traj.horizon; ++t) {
        double sum = 0.0;
        for (int a = 0; a < na; ++a) {
            const double prev = (t == 0) ? initial_price : traj.prices[t - 1][a];
            const double r = std::log(traj.prices[t][a]) - std::log(prev);
            traj.asset_returns[t][a] = r;
            sum += r;
        }
        traj.market_return[t] = na > 0 ? sum / na : 0.0;
    }
}

// --- file format -----------------------------------------------------------
// <base>.traj : one line per step: "<step> <digits> <price...> <V_a>" where
//               digits encodes each agent's action as (action - action_min).
// <base>.json : sidecar with identity, label, event time and the config echo.

inline void save_trajectory(const ActionTrajectory& traj, const std::string& base) {
    if (traj.alphabet > 10) throw std::invalid_argument("trajectory: alphabet too large to encode");
    std::string out;
    out.reserve(static_cast<std::size_t>(traj.horizon) * (traj.n_agents + 64));
    for (int t = 0; t < traj.horizon; ++t) {
        out += std::to_string(t + 1);
        out.push_back(' ');
        for (int i = 0; i < traj.n_agents; ++i)
            out.push_back(static_cast<char>('0' + (traj.action(t, i) - traj.action_min)));
        for (const double p : traj.prices.empty() ? std::vector<double>{} : traj.prices[t]) {
            out.push_back(' ');
            out += fmt_double(p);
        }
        out.push_back(' ');
        out += fmt_double(traj.order_param[t]);
        out.push_back('\n');
    }
    write_file(base + ".traj", out);

    nlohmann::ordered_json side;
    side["schema"] = "geomherd.trajectory/1";
    side["id"] = traj.id;
    side["substrate"] = traj.substrate;
    side["n_agents"] = traj.n_agents;
    side["horizon"] = traj.horizon;
    side["n_assets"] = traj.n_assets();
    side["alphabet"] = traj.alphabet;
    side["action_min"] = traj.action_min;
    side["label"] = traj.label;
    side["event_time"] = traj.event_time ? nlohmann::ordered_json(*traj.event_time)
                                         : nlohmann::ordered_json(nullptr);
    side["event_threshold"] = traj.event_threshold;
    side["meta"] = traj.meta;
    write_file(base + ".json", side.dump(2) + "\n");
}

inline ActionTrajectory load_trajectory(const std::string& base) {
    const auto side = nlohmann::ordered_json::parse(read_file(base + ".json"));
    if (side.value("schema", "") != "geomherd.trajectory/1")
        throw std::runtime_error("trajectory: unknown sidecar schema in " + base + ".json");
    ActionTrajectory traj;
    traj.id = side.at("id").get<std::string>();
    traj.substrate = side.at("substrate").get<std::string>();
    traj.n_agents = side.at("n_agents").get<int>();
    traj.horizon = side.at("horizon").get<int>();
    traj.alphabet = side.at("alphabet").get<int>();
    traj.action_min = side.at("action_min").get<int>();
    traj.label = side.at("label").get<std::string>();
    if (!side.at("event_time").is_null()) traj.event_time = side.at("event_time").get<int>();
    traj.event_threshold = side.at("event_threshold").get<double>();
    traj.meta = side.at("meta");
    const int n_assets = side.at("n_assets").get<int>();

    traj.actions.resize(static_cast<std::size_t>(traj.horizon) * traj.n_agents);
    traj.order_param.resize(traj.horizon);
    traj.prices.assign(traj.horizon, std::vector<double>(n_assets, 0.0));

    const std::string body = read_file(base + ".traj");
    int t = 0;
    std::size_t pos = 0;
    while (pos < body.size() && t < traj.horizon) {
        std::size_t eol = body.find('\n', pos);
        if (eol == std::string::npos) eol = body.size();
        const auto fields = split(body.substr(pos, eol - pos), ' ');
        if (static_cast<int>(fields.size()) != 3 + n_assets ||
            std::stoi(fields[0]) != t + 1 ||
            static_cast<int>(fields[1].size()) != traj.n_agents)
            throw std::runtime_error("trajectory: malformed record at step " +
                                     std::to_string(t + 1) + " in " + base + ".traj");
        for (int i = 0; i < traj.n_agents; ++i)
            traj.actions[static_cast<std::size_t>(t) * traj.n_agents + i] =
                static_cast<std::int8_t>(fields[1][i] - '0' + traj.action_min);
        for (int a = 0; a < n_assets; ++a) traj.prices[t][a] = std::stod(fields[2 + a]);
        traj.order_param[t] = std::stod(fields[2 + n_assets]);
        pos = eol + 1;
        ++t;
    }
    if (t != traj.horizon) throw std::runtime_error("trajectory: truncated file " + base + ".traj");
    if (n_assets > 0)
        derive_returns(traj, traj.meta.value("initial_price", 100.0));
    else {
        traj.asset_returns.assign(traj.horizon, {});
        traj.market_return.assign(traj.horizon, 0.0);
    }
    return traj;
}

}  // namespace geomherd
