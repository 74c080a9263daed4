#pragma once

// End-to-end experiment orchestration. One JSON config drives
//   simulate -> graph -> curvature/flow/veff -> baselines -> detect -> evaluate
// with content-addressed stage caching, a deterministic run manifest, named
// presets, a calibration sweep, and a one-axis-at-a-time ablation table.
//
// Determinism contract: every artifact is a pure function of the config (plus
// the library version). Worker counts come from the environment only and can
// never change bytes; reruns hit the stage cache instead of recomputing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geomherd/baselines.hpp"
#include "geomherd/calibration.hpp"
#include "geomherd/cws.hpp"
#include "geomherd/detectors.hpp"
#include "geomherd/eval.hpp"
#include "geomherd/graph.hpp"
#include "geomherd/parallel.hpp"
#include "geomherd/rng.hpp"
#include "geomherd/series.hpp"
#include "geomherd/tables.hpp"
#include "geomherd/trajectory.hpp"
#include "geomherd/util.hpp"
#include "geomherd/vicsek.hpp"

namespace geomherd {

// --- strict config reading ---------------------------------------------------

// Wrapper over a JSON object that records key consumption; finish() rejects
// anything the schema never asked for, so typos cannot silently no-op.
class StrictReader {
  public:
    StrictReader(const nlohmann::ordered_json& j, std::string path)
        : j_(&j), path_(std::move(path)) {
        if (!j_->is_object())
            throw std::invalid_argument("config: " + path_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_->contains(key); }

    // Marks a key as consumed without reading (for manually-handled values).
    void mark(const std::string& key) { seen_.insert(key); }

    const nlohmann::ordered_json& raw(const std::string& key) {
        seen_.insert(key);
        return (*j_)[key];
    }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!j_->contains(key)) return fallback;
        return read<T>(key);
    }

    template <typename T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!j_->contains(key))
            throw std::invalid_argument("config: missing key " + path_ + "." + key);
        return read<T>(key);
    }

    // Child object (or empty object when absent).
    nlohmann::ordered_json child(const std::string& key) {
        seen_.insert(key);
        if (!j_->contains(key)) return nlohmann::ordered_json::object();
        const auto& v = (*j_)[key];
        if (!v.is_object())
            throw std::invalid_argument("config: " + path_ + "." + key + " must be an object");
        return v;
    }

    nlohmann::ordered_json array(const std::string& key) {
        seen_.insert(key);
        if (!j_->contains(key)) return nlohmann::ordered_json::array();
        const auto& v = (*j_)[key];
        if (!v.is_array())
            throw std::invalid_argument("config: " + path_ + "." + key + " must be an array");
        return v;
    }

    void finish() const {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key()))
                throw std::invalid_argument("config: unknown key " + path_ + "." + it.key());
    }

  private:
    template <typename T>
    T read(const std::string& key) {
        try {
            return (*j_)[key].get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("config: bad value at " + path_ + "." + key + ": " +
                                        e.what());
        }
    }

    const nlohmann::ordered_json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

// --- experiment configuration ------------------------------------------------

struct SubstrateBlock {
    std::string kind = "cws";     // "cws" | "vicsek"
    std::vector<double> levels;   // coupling levels (cws) or noise levels (vicsek)
    int seeds_per_level = 10;
    CwsConfig cws;          // template; coupling and seed are filled per unit
    VicsekConfig vicsek;    // template; noise and seed are filled per unit
};

struct FlowBlock {
    bool enabled = false;
    FlowConfig cfg;
    int stride = 1;      // run the flow on every k-th snapshot
    int max_edges = 0;   // skip snapshots with more edges (0 = no cap)
};

struct VeffBlock {
    bool enabled = false;
    VeffConfig cfg;
};

struct BaselineBlock {
    bool enabled = false;
    bool csad = true;
    bool lsv = true;
    bool price_graph = true;
    bool action_mi = true;
};

struct DetectorSpec {
    std::string name;     // row label in every table
    std::string series;   // input column: mean_all|mean_pos|frac_neg|tau_sing|v_eff|csad|lsv|pcg|aami
    DetectorConfig cfg;
};

struct EvalBlock {
    int n_boot = 5000;
    bool contrasts = true;
};

struct AblationRow {
    std::string axis;    // detector|edge_mode|window|transport|sign_pooling|flow
    std::string value;
};

struct CalibrationBlock {
    std::string series = "mean_pos";
    DetectorConfig base;   // kind/direction/etc; k_sigma and h_sigma come from the grid
    std::vector<double> k_grid = default_k_grid();
    std::vector<double> h_grid = default_h_grid();
    int n_boot = 2000;
};

struct ExperimentConfig {
    int schema_version = 1;
    std::string out_dir;
    std::uint64_t seed = 1;
    SubstrateBlock substrate;
    GraphConfig graph;
    CurvatureParams curvature;
    FlowBlock flow;
    VeffBlock veff;
    BaselineBlock baselines;
    std::vector<DetectorSpec> detectors;
    EvalBlock eval;
    std::vector<AblationRow> ablation;
    CalibrationBlock calibration;
};

inline std::string to_string(TransportSolver s) {
    return s == TransportSolver::exact_lp ? "exact" : "sinkhorn";
}

inline TransportSolver transport_from_string(const std::string& s) {
    if (s == "exact") return TransportSolver::exact_lp;
    if (s == "sinkhorn") return TransportSolver::sinkhorn;
    throw std::invalid_argument("config: unknown transport solver: " + s);
}

inline std::string to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

inline Direction direction_from_string(const std::string& s) {
    if (s == "up") return Direction::up;
    if (s == "down") return Direction::down;
    throw std::invalid_argument("config: unknown detector direction: " + s);
}

namespace detail {

inline DetectorConfig parse_detector_config(StrictReader& r, const DetectorConfig& defaults) {
    DetectorConfig cfg = defaults;
    cfg.kind = detector_kind_from_string(r.get<std::string>("kind", to_string(defaults.kind)));
    cfg.direction =
        direction_from_string(r.get<std::string>("direction", to_string(defaults.direction)));
    cfg.baseline_window = r.get<int>("baseline_window", defaults.baseline_window);
    cfg.k_sigma = r.get<double>("k_sigma", defaults.k_sigma);
    cfg.h_sigma = r.get<double>("h_sigma", defaults.h_sigma);
    cfg.ewma_lambda = r.get<double>("ewma_lambda", defaults.ewma_lambda);
    cfg.kendall_window = r.get<int>("kendall_window", defaults.kendall_window);
    cfg.kendall_thresh = r.get<double>("kendall_thresh", defaults.kendall_thresh);
    cfg.skip_initial = r.get<int>("skip_initial", defaults.skip_initial);
    cfg.min_baseline_var = r.get<double>("min_baseline_var", defaults.min_baseline_var);
    return cfg;
}

inline void append_detector_config(nlohmann::ordered_json& j, const DetectorConfig& cfg) {
    j["kind"] = to_string(cfg.kind);
    j["direction"] = to_string(cfg.direction);
    j["baseline_window"] = cfg.baseline_window;
    j["k_sigma"] = cfg.k_sigma;
    j["h_sigma"] = cfg.h_sigma;
    j["ewma_lambda"] = cfg.ewma_lambda;
    j["kendall_window"] = cfg.kendall_window;
    j["kendall_thresh"] = cfg.kendall_thresh;
    j["skip_initial"] = cfg.skip_initial;
    j["min_baseline_var"] = cfg.min_baseline_var;
}

}  // namespace detail

inline const std::set<std::string>& ablation_axes() {
    static const std::set<std::string> axes = {"detector", "edge_mode",    "window",
                                               "transport", "sign_pooling", "flow"};
    return axes;
}

// Parse + cross-validate a config document. Unknown keys anywhere are errors.
inline ExperimentConfig parse_config(const nlohmann::ordered_json& doc) {
    ExperimentConfig cfg;
    StrictReader root(doc, "$");

    cfg.schema_version = root.require<int>("schema_version");
    if (cfg.schema_version != 1)
        throw std::invalid_argument("config: unsupported schema_version " +
                                    std::to_string(cfg.schema_version));
    cfg.out_dir = root.get<std::string>("out_dir", "");
    cfg.seed = root.get<std::uint64_t>("seed", 1);

    {
        const auto j = root.child("substrate");
        StrictReader r(j, "$.substrate");
        cfg.substrate.kind = r.require<std::string>("kind");
        if (cfg.substrate.kind != "cws" && cfg.substrate.kind != "vicsek")
            throw std::invalid_argument("config: substrate.kind must be cws or vicsek");
        cfg.substrate.levels = r.require<std::vector<double>>("levels");
        if (cfg.substrate.levels.empty())
            throw std::invalid_argument("config: substrate.levels must be non-empty");
        cfg.substrate.seeds_per_level = r.get<int>("seeds_per_level", 10);
        if (cfg.substrate.seeds_per_level < 1)
            throw std::invalid_argument("config: substrate.seeds_per_level must be >= 1");
        if (cfg.substrate.kind == "cws") {
            auto& c = cfg.substrate.cws;
            c.n_agents = r.get<int>("n_agents", c.n_agents);
            c.n_assets = r.get<int>("n_assets", c.n_assets);
            c.coupling_base = r.get<double>("coupling_base", c.coupling_base);
            c.ramp_start = r.get<int>("ramp_start", c.ramp_start);
            c.ramp_end = r.get<int>("ramp_end", c.ramp_end);
            c.signal_std = r.get<double>("signal_std", c.signal_std);
            c.noise_std = r.get<double>("noise_std", c.noise_std);
            c.theta_action = r.get<double>("theta_action", c.theta_action);
            c.impact_coeff = r.get<double>("impact_coeff", c.impact_coeff);
            c.beta_spread = r.get<double>("beta_spread", c.beta_spread);
            c.sigma_xi = r.get<double>("sigma_xi", c.sigma_xi);
            c.initial_price = r.get<double>("initial_price", c.initial_price);
            c.theta_event = r.get<double>("theta_event", c.theta_event);
            c.horizon = r.get<int>("horizon", c.horizon);
        } else {
            auto& v = cfg.substrate.vicsek;
            v.n_agents = r.get<int>("n_agents", v.n_agents);
            v.box = r.get<double>("box", v.box);
            v.radius = r.get<double>("radius", v.radius);
            v.speed = r.get<double>("speed", v.speed);
            v.label_threshold = r.get<double>("label_threshold", v.label_threshold);
            v.heading_bins = r.get<int>("heading_bins", v.heading_bins);
            v.theta_event = r.get<double>("theta_event", v.theta_event);
            v.warmup = r.get<int>("warmup", v.warmup);
            v.consecutive = r.get<int>("consecutive", v.consecutive);
            v.snapshot_stride = r.get<int>("snapshot_stride", v.snapshot_stride);
            v.horizon = r.get<int>("horizon", v.horizon);
        }
        r.finish();
    }

    {
        const auto j = root.child("graph");
        StrictReader r(j, "$.graph");
        cfg.graph.mode = edge_mode_from_string(
            r.get<std::string>("mode", to_string(cfg.graph.mode)));
        cfg.graph.window = r.get<int>("window", cfg.graph.window);
        cfg.graph.stride = r.get<int>("stride", cfg.graph.stride);
        cfg.graph.retain = r.get<double>("retain", cfg.graph.retain);
        cfg.graph.knn = r.get<int>("knn", cfg.graph.knn);
        r.finish();
    }

    {
        const auto j = root.child("curvature");
        StrictReader r(j, "$.curvature");
        cfg.curvature.alpha = r.get<double>("alpha", cfg.curvature.alpha);
        cfg.curvature.kappa_pos = r.get<double>("kappa_pos", cfg.curvature.kappa_pos);
        cfg.curvature.kappa_neg = r.get<double>("kappa_neg", cfg.curvature.kappa_neg);
        cfg.curvature.solver =
            transport_from_string(r.get<std::string>("transport", to_string(cfg.curvature.solver)));
        cfg.curvature.sinkhorn_reg = r.get<double>("sinkhorn_reg", cfg.curvature.sinkhorn_reg);
        r.finish();
    }

    {
        const auto j = root.child("flow");
        StrictReader r(j, "$.flow");
        cfg.flow.enabled = r.get<bool>("enabled", false);
        cfg.flow.cfg.step_size = r.get<double>("step_size", cfg.flow.cfg.step_size);
        cfg.flow.cfg.max_iters = r.get<int>("max_iters", cfg.flow.cfg.max_iters);
        cfg.flow.cfg.pinch_curvature =
            r.get<double>("pinch_curvature", cfg.flow.cfg.pinch_curvature);
        cfg.flow.cfg.min_weight = r.get<double>("min_weight", cfg.flow.cfg.min_weight);
        cfg.flow.cfg.renormalize = r.get<bool>("renormalize", cfg.flow.cfg.renormalize);
        cfg.flow.stride = r.get<int>("stride", 1);
        cfg.flow.max_edges = r.get<int>("max_edges", 0);
        if (cfg.flow.stride < 1) throw std::invalid_argument("config: flow.stride must be >= 1");
        if (cfg.flow.max_edges < 0)
            throw std::invalid_argument("config: flow.max_edges must be >= 0");
        r.finish();
    }

    {
        const auto j = root.child("veff");
        StrictReader r(j, "$.veff");
        cfg.veff.enabled = r.get<bool>("enabled", false);
        cfg.veff.cfg.levels = r.get<int>("levels", cfg.veff.cfg.levels);
        r.finish();
    }

    {
        const auto j = root.child("baselines");
        StrictReader r(j, "$.baselines");
        cfg.baselines.enabled = r.get<bool>("enabled", false);
        cfg.baselines.csad = r.get<bool>("csad", true);
        cfg.baselines.lsv = r.get<bool>("lsv", true);
        cfg.baselines.price_graph = r.get<bool>("price_graph", true);
        cfg.baselines.action_mi = r.get<bool>("action_mi", true);
        r.finish();
        if (cfg.baselines.enabled && cfg.substrate.kind != "cws")
            throw std::invalid_argument(
                "config: baselines need the market substrate (no prices on vicsek)");
    }

    for (const auto& dj : root.array("detectors")) {
        StrictReader r(dj, "$.detectors[]");
        DetectorSpec spec;
        spec.name = r.require<std::string>("name");
        spec.series = r.require<std::string>("series");
        spec.cfg = detail::parse_detector_config(r, DetectorConfig{});
        r.finish();
        cfg.detectors.push_back(std::move(spec));
    }
    {
        std::set<std::string> names;
        for (const auto& d : cfg.detectors)
            if (!names.insert(d.name).second)
                throw std::invalid_argument("config: duplicate detector name: " + d.name);
    }

    {
        const auto j = root.child("eval");
        StrictReader r(j, "$.eval");
        cfg.eval.n_boot = r.get<int>("n_boot", 5000);
        cfg.eval.contrasts = r.get<bool>("contrasts", true);
        r.finish();
    }

    for (const auto& aj : root.array("ablation")) {
        StrictReader r(aj, "$.ablation[]");
        AblationRow row;
        row.axis = r.require<std::string>("axis");
        if (!aj.contains("value"))
            throw std::invalid_argument("config: missing key $.ablation[].value");
        if (aj["value"].is_number_integer()) {
            row.value = std::to_string(r.raw("value").get<long long>());
        } else {
            row.value = r.require<std::string>("value");
        }
        r.finish();
        if (!ablation_axes().count(row.axis))
            throw std::invalid_argument("config: unknown ablation axis: " + row.axis);
        cfg.ablation.push_back(std::move(row));
    }

    {
        const auto j = root.child("calibration");
        StrictReader r(j, "$.calibration");
        cfg.calibration.series = r.get<std::string>("series", "mean_pos");
        cfg.calibration.k_grid = r.get<std::vector<double>>("k_grid", default_k_grid());
        cfg.calibration.h_grid = r.get<std::vector<double>>("h_grid", default_h_grid());
        cfg.calibration.n_boot = r.get<int>("n_boot", 2000);
        const auto dj = r.child("detector");
        StrictReader dr(dj, "$.calibration.detector");
        cfg.calibration.base = detail::parse_detector_config(dr, DetectorConfig{});
        dr.finish();
        r.finish();
    }

    root.finish();

    // cross-checks: every detector input series must be produced by some stage
    std::set<std::string> available = {"mean_all", "mean_pos", "frac_neg"};
    if (cfg.flow.enabled) available.insert("tau_sing");
    if (cfg.veff.enabled) available.insert("v_eff");
    if (cfg.baselines.enabled) {
        if (cfg.baselines.csad) available.insert("csad");
        if (cfg.baselines.lsv) available.insert("lsv");
        if (cfg.baselines.price_graph) available.insert("pcg");
        if (cfg.baselines.action_mi) available.insert("aami");
    }
    for (const auto& d : cfg.detectors)
        if (!available.count(d.series))
            throw std::invalid_argument("config: detector '" + d.name + "' wants series '" +
                                        d.series + "' which no enabled stage produces");
    if (!available.count(cfg.calibration.series))
        throw std::invalid_argument("config: calibration.series '" + cfg.calibration.series +
                                    "' is not produced by any enabled stage");
    return cfg;
}

// Fully-populated canonical form: parse(canonical(cfg)) == cfg, and its dump
// (with out_dir blanked) is the config hash every manifest carries.
inline nlohmann::ordered_json canonical_config(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema_version"] = cfg.schema_version;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;

    nlohmann::ordered_json sub;
    sub["kind"] = cfg.substrate.kind;
    sub["levels"] = cfg.substrate.levels;
    sub["seeds_per_level"] = cfg.substrate.seeds_per_level;
    if (cfg.substrate.kind == "cws") {
        const auto& c = cfg.substrate.cws;
        sub["n_agents"] = c.n_agents;
        sub["n_assets"] = c.n_assets;
        sub["coupling_base"] = c.coupling_base;
        sub["ramp_start"] = c.ramp_start;
        sub["ramp_end"] = c.ramp_end;
        sub["signal_std"] = c.signal_std;
        sub["noise_std"] = c.noise_std;
        sub["theta_action"] = c.theta_action;
        sub["impact_coeff"] = c.impact_coeff;
        sub["beta_spread"] = c.beta_spread;
        sub["sigma_xi"] = c.sigma_xi;
        sub["initial_price"] = c.initial_price;
        sub["theta_event"] = c.theta_event;
        sub["horizon"] = c.horizon;
    } else {
        const auto& v = cfg.substrate.vicsek;
        sub["n_agents"] = v.n_agents;
        sub["box"] = v.box;
        sub["radius"] = v.radius;
        sub["speed"] = v.speed;
        sub["label_threshold"] = v.label_threshold;
        sub["heading_bins"] = v.heading_bins;
        sub["theta_event"] = v.theta_event;
        sub["warmup"] = v.warmup;
        sub["consecutive"] = v.consecutive;
        sub["snapshot_stride"] = v.snapshot_stride;
        sub["horizon"] = v.horizon;
    }
    j["substrate"] = std::move(sub);

    j["graph"] = {{"mode", to_string(cfg.graph.mode)},
                  {"window", cfg.graph.window},
                  {"stride", cfg.graph.stride},
                  {"retain", cfg.graph.retain},
                  {"knn", cfg.graph.knn}};
    j["curvature"] = {{"alpha", cfg.curvature.alpha},
                      {"kappa_pos", cfg.curvature.kappa_pos},
                      {"kappa_neg", cfg.curvature.kappa_neg},
                      {"transport", to_string(cfg.curvature.solver)},
                      {"sinkhorn_reg", cfg.curvature.sinkhorn_reg}};
    j["flow"] = {{"enabled", cfg.flow.enabled},
                 {"step_size", cfg.flow.cfg.step_size},
                 {"max_iters", cfg.flow.cfg.max_iters},
                 {"pinch_curvature", cfg.flow.cfg.pinch_curvature},
                 {"min_weight", cfg.flow.cfg.min_weight},
                 {"renormalize", cfg.flow.cfg.renormalize},
                 {"stride", cfg.flow.stride},
                 {"max_edges", cfg.flow.max_edges}};
    j["veff"] = {{"enabled", cfg.veff.enabled}, {"levels", cfg.veff.cfg.levels}};
    j["baselines"] = {{"enabled", cfg.baselines.enabled},
                      {"csad", cfg.baselines.csad},
                      {"lsv", cfg.baselines.lsv},
                      {"price_graph", cfg.baselines.price_graph},
                      {"action_mi", cfg.baselines.action_mi}};

    auto dets = nlohmann::ordered_json::array();
    for (const auto& d : cfg.detectors) {
        nlohmann::ordered_json dj;
        dj["name"] = d.name;
        dj["series"] = d.series;
        detail::append_detector_config(dj, d.cfg);
        dets.push_back(std::move(dj));
    }
    j["detectors"] = std::move(dets);

    j["eval"] = {{"n_boot", cfg.eval.n_boot}, {"contrasts", cfg.eval.contrasts}};

    auto abl = nlohmann::ordered_json::array();
    for (const auto& row : cfg.ablation) abl.push_back({{"axis", row.axis}, {"value", row.value}});
    j["ablation"] = std::move(abl);

    nlohmann::ordered_json cal;
    cal["series"] = cfg.calibration.series;
    cal["k_grid"] = cfg.calibration.k_grid;
    cal["h_grid"] = cfg.calibration.h_grid;
    cal["n_boot"] = cfg.calibration.n_boot;
    nlohmann::ordered_json cd;
    detail::append_detector_config(cd, cfg.calibration.base);
    cal["detector"] = std::move(cd);
    j["calibration"] = std::move(cal);
    return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    auto j = canonical_config(cfg);
    j["out_dir"] = "";  // the hash names the experiment, not where it lives
    return to_hex(fnv1a64(j.dump()));
}

// --- presets -------------------------------------------------------------------

inline nlohmann::ordered_json preset_config(const std::string& name) {
    auto detector = [](const std::string& dname, const std::string& series,
                       const std::string& kind, const std::string& direction, double k, double h,
                       double min_var = 0.0) {
        nlohmann::ordered_json d;
        d["name"] = dname;
        d["series"] = series;
        d["kind"] = kind;
        d["direction"] = direction;
        d["k_sigma"] = k;
        d["h_sigma"] = h;
        if (min_var > 0.0) d["min_baseline_var"] = min_var;
        return d;
    };

    if (name == "headline-desk") {
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["out_dir"] = "runs/headline-desk";
        j["seed"] = 1;
        j["substrate"] = {{"kind", "cws"},
                          {"levels", {0.5, 0.8, 1.2, 1.8, 2.5}},
                          {"seeds_per_level", 10}};
        j["graph"] = {{"mode", "binary_agreement"}, {"window", 100}, {"stride", 10}};
        j["curvature"] = {{"transport", "exact"}};
        j["flow"] = {{"enabled", true}, {"max_edges", 400}};
        j["veff"] = {{"enabled", true}};
        j["baselines"] = {{"enabled", true}};
        j["detectors"] = {detector("kappa_recall", "mean_pos", "cusum", "up", 0.5, 4.0),
                          detector("kappa_precision", "mean_pos", "cusum", "up", 2.0, 4.0),
                          detector("beta_minus", "frac_neg", "cusum_or_kendall", "up", 1.0, 5.0),
                          detector("tau_sing", "tau_sing", "cusum", "down", 0.5, 4.0),
                          detector("veff", "v_eff", "cusum", "down", 0.5, 4.0),
                          detector("csad", "csad", "cusum", "down", 0.5, 4.0),
                          detector("lsv", "lsv", "cusum", "up", 0.5, 4.0),
                          detector("price_graph", "pcg", "cusum", "up", 0.5, 4.0),
                          detector("action_mi", "aami", "cusum", "up", 0.5, 4.0, 1e-12)};
        j["eval"] = {{"n_boot", 5000}, {"contrasts", true}};
        j["ablation"] = {{{"axis", "detector"}, {"value", "zscore"}},
                         {{"axis", "detector"}, {"value", "ewma"}},
                         {{"axis", "detector"}, {"value", "kendall"}},
                         {{"axis", "edge_mode"}, {"value", "cosine"}},
                         {{"axis", "window"}, {"value", "50"}},
                         {{"axis", "window"}, {"value", "200"}},
                         {{"axis", "transport"}, {"value", "sinkhorn"}},
                         {{"axis", "sign_pooling"}, {"value", "off"}},
                         {{"axis", "flow"}, {"value", "off"}}};
        j["calibration"] = {{"series", "mean_pos"}};
        return j;
    }
    if (name == "vicsek-transfer") {
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["out_dir"] = "runs/vicsek-transfer";
        j["seed"] = 1;
        j["substrate"] = {{"kind", "vicsek"},
                          {"levels", {0.5, 1.0, 1.6, 2.0, 2.5}},
                          {"seeds_per_level", 10}};
        j["graph"] = {{"mode", "knn_heading"}, {"window", 100}, {"stride", 50}, {"knn", 10}};
        j["curvature"] = {{"transport", "exact"}};
        j["flow"] = {{"enabled", false}};
        j["veff"] = {{"enabled", true}};
        j["baselines"] = {{"enabled", false}};
        nlohmann::ordered_json d1 = detector("kappa_recall", "mean_all", "cusum", "up", 0.5, 4.0);
        d1["baseline_window"] = 8;
        nlohmann::ordered_json d2 = detector("veff", "v_eff", "cusum", "down", 0.5, 4.0);
        d2["baseline_window"] = 8;
        j["detectors"] = {d1, d2};
        j["eval"] = {{"n_boot", 5000}, {"contrasts", true}};
        j["calibration"] = {{"series", "mean_all"},
                            {"detector", {{"baseline_window", 8}}}};
        return j;
    }
    if (name == "smoke") {
        // tiny end-to-end config for harness tests and quick sanity runs
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["out_dir"] = "runs/smoke";
        j["seed"] = 1;
        j["substrate"] = {{"kind", "cws"},
                          {"levels", {0.5, 1.8}},
                          {"seeds_per_level", 2},
                          {"n_agents", 24},
                          {"horizon", 400}};
        j["graph"] = {{"mode", "binary_agreement"}, {"window", 60}, {"stride", 20}};
        j["curvature"] = {{"transport", "exact"}};
        j["flow"] = {{"enabled", true}, {"max_edges", 300}, {"max_iters", 60}};
        j["veff"] = {{"enabled", true}};
        j["baselines"] = {{"enabled", true}};
        nlohmann::ordered_json d1 = detector("kappa_recall", "mean_pos", "cusum", "up", 0.5, 4.0);
        d1["baseline_window"] = 6;
        nlohmann::ordered_json d2 = detector("beta_minus", "frac_neg", "cusum_or_kendall", "up",
                                             1.0, 5.0);
        d2["baseline_window"] = 6;
        d2["kendall_window"] = 8;
        j["detectors"] = {d1, d2};
        j["eval"] = {{"n_boot", 500}, {"contrasts", true}};
        j["ablation"] = {{{"axis", "detector"}, {"value", "zscore"}},
                         {{"axis", "window"}, {"value", "50"}}};
        j["calibration"] = {{"series", "mean_pos"},
                            {"k_grid", {0.5, 2.0}},
                            {"h_grid", {2.0, 4.0}},
                            {"n_boot", 200},
                            {"detector", {{"baseline_window", 6}}}};
        return j;
    }
    throw std::invalid_argument("unknown preset: " + name +
                                " (known: headline-desk, vicsek-transfer, smoke)");
}

// --- evaluation emitters ---------------------------------------------------------
// Shared between the pipeline's evaluate stage and the standalone CLI command.

struct DetectorReport {
    std::string name;
    PooledMetrics metrics;
};

inline std::vector<DetectorReport> pool_detector_outcomes(
    const std::vector<std::string>& names,
    const std::vector<std::vector<TrajectoryOutcome>>& outcomes, int n_boot,
    std::uint64_t seed) {
    std::vector<DetectorReport> reports;
    for (std::size_t d = 0; d < names.size(); ++d)
        reports.push_back({names[d], pool_outcomes(outcomes[d], n_boot, mix_key(seed, 0xE7A1ull,
                                                                                 d))});
    return reports;
}

inline TextTable metrics_table(const std::vector<DetectorReport>& reports) {
    TextTable t;
    t.columns = {"detector", "n_pos",    "n_neg",      "n_excluded", "n_lead",
                 "n_late",   "n_miss",   "n_fp",       "n_tn",       "n_disabled",
                 "precision", "recall_lead", "recall_fire", "far",   "auroc",
                 "auprc",    "median_lead", "lead_lo",  "lead_hi"};
    for (const auto& [name, m] : reports)
        t.add_row({name, table_cell(m.n_pos), table_cell(m.n_neg), table_cell(m.n_excluded),
                   table_cell(m.n_lead), table_cell(m.n_late), table_cell(m.n_miss),
                   table_cell(m.n_fp), table_cell(m.n_tn), table_cell(m.n_disabled),
                   table_cell(m.precision), table_cell(m.recall_lead),
                   table_cell(m.recall_fire), table_cell(m.far), table_cell(m.auroc_score),
                   table_cell(m.auprc_score), table_cell(m.median_lead),
                   table_cell(m.lead_ci.lo), table_cell(m.lead_ci.hi)});
    return t;
}

// Paired lead-time contrasts over trajectories where both detectors fired
// ahead of the event. Outcome rows must be aligned on the same unit order.
inline TextTable contrasts_table(const std::vector<std::string>& names,
                                 const std::vector<std::vector<TrajectoryOutcome>>& outcomes,
                                 int n_boot, std::uint64_t seed) {
    TextTable t;
    t.columns = {"detector_a", "detector_b", "n_paired", "median_diff",
                 "ci_lo",      "ci_hi",      "p_value"};
    for (std::size_t a = 0; a < names.size(); ++a)
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            std::vector<double> diffs;
            for (std::size_t i = 0; i < outcomes[a].size(); ++i)
                if (outcomes[a][i].lead_fire && outcomes[b][i].lead_fire)
                    diffs.push_back(outcomes[a][i].lead - outcomes[b][i].lead);
            const auto test =
                paired_bootstrap_lead(diffs, n_boot, mix_key(seed, 0xC047ull, a, b));
            t.add_row({names[a], names[b], table_cell(test.n_pairs),
                       table_cell(test.median_diff), table_cell(test.ci.lo),
                       table_cell(test.ci.hi), table_cell(test.p_value)});
        }
    return t;
}

inline nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline nlohmann::ordered_json evaluation_summary(const std::vector<DetectorReport>& reports,
                                                 const std::string& config_hash_hex) {
    nlohmann::ordered_json summary;
    summary["schema"] = "geomherd.summary/1";
    if (!config_hash_hex.empty()) summary["config_hash"] = config_hash_hex;
    auto mj = nlohmann::ordered_json::array();
    for (const auto& [name, m] : reports) {
        nlohmann::ordered_json row;
        row["detector"] = name;
        row["n_pos"] = m.n_pos;
        row["n_neg"] = m.n_neg;
        row["n_excluded"] = m.n_excluded;
        row["n_lead"] = m.n_lead;
        row["n_late"] = m.n_late;
        row["n_miss"] = m.n_miss;
        row["n_fp"] = m.n_fp;
        row["n_tn"] = m.n_tn;
        row["n_disabled"] = m.n_disabled;
        row["precision"] = json_number(m.precision);
        row["recall_lead"] = json_number(m.recall_lead);
        row["recall_fire"] = json_number(m.recall_fire);
        row["far"] = json_number(m.far);
        row["auroc"] = json_number(m.auroc_score);
        row["auprc"] = json_number(m.auprc_score);
        row["median_lead"] = json_number(m.median_lead);
        row["lead_lo"] = json_number(m.lead_ci.lo);
        row["lead_hi"] = json_number(m.lead_ci.hi);
        mj.push_back(std::move(row));
    }
    summary["detectors"] = std::move(mj);
    return summary;
}

// --- pipeline ------------------------------------------------------------------

struct UnitMeta {
    std::string id;
    double level = 0.0;
    std::string label;
    int event_time = -1;  // -1 = none
};

class Pipeline {
  public:
    enum class Stage { simulate, graph, features, baselines, detect, evaluate };

    explicit Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.out_dir.empty())
            throw std::invalid_argument("config: out_dir is required to run the pipeline");
        std::filesystem::create_directories(cfg_.out_dir);
        canon_ = canonical_config(cfg_);
        load_cache();
    }

    const ExperimentConfig& config() const { return cfg_; }

    // Executes stages up to `target` and writes config.json, run_log.json and
    // manifest.json. Returns the manifest document.
    nlohmann::ordered_json run(Stage target = Stage::evaluate) {
        write_file(path("config.json"), canon_.dump(2) + "\n");
        try {
            const auto sims = ensure_sims();
            if (target == Stage::simulate) return finish_manifest("complete", "");

            if (needs_graph(target)) ensure_graph(sims);
            if (target == Stage::graph) return finish_manifest("complete", "");

            if (needs_features(target)) ensure_features(sims);
            if (target == Stage::features) return finish_manifest("complete", "");

            if (cfg_.baselines.enabled) ensure_baselines(sims);
            if (target == Stage::baselines) return finish_manifest("complete", "");

            const auto detection = detect_stage();
            if (target == Stage::detect) return finish_manifest("complete", "");

            evaluate_stage(detection);
            return finish_manifest("complete", "");
        } catch (const std::exception& e) {
            finish_manifest("partial", e.what());
            throw;
        }
    }

    // Labelled per-unit pool for one series column, running the stages it
    // depends on (cached like any other run). Shared by the calibration
    // entrypoint and external analyses of a finished feature stage.
    std::vector<LabelledSeries> labelled_pool(const std::string& series) {
        write_file(path("config.json"), canon_.dump(2) + "\n");
        const auto sims = ensure_sims();
        ensure_graph(sims);
        ensure_features(sims);
        if (!is_feature_series(series)) ensure_baselines(sims);

        std::vector<LabelledSeries> pool;
        for (const auto& u : load_unit_meta()) {
            LabelledSeries s;
            s.id = u.id;
            s.positive = positive_label(u.label);
            s.event_time = u.event_time;
            s.samples = unit_series(u.id, series);
            pool.push_back(std::move(s));
        }
        return pool;
    }

    // Operating-point sweep on the calibration series; writes calibration.csv/.txt.
    TextTable run_calibration() {
        const auto pool = labelled_pool(cfg_.calibration.series);
        const auto sweep =
            calibration_sweep(pool, cfg_.calibration.base, cfg_.calibration.k_grid,
                              cfg_.calibration.h_grid, cfg_.calibration.n_boot,
                              mix_key(cfg_.seed, 0xCA1Bull));

        TextTable t;
        t.columns = {"k_sigma", "h_sigma", "n_lead", "recall_lead", "far",
                     "median_lead", "lead_lo", "lead_hi", "point"};
        for (const auto& cell : sweep.cells) {
            std::string point;
            if (cell.k_sigma == 0.5 && cell.h_sigma == 4.0) point = "recall-oriented";
            if (cell.k_sigma == 2.0 && cell.h_sigma == 4.0) point = "precision-oriented";
            t.add_row({table_cell(cell.k_sigma), table_cell(cell.h_sigma),
                       table_cell(cell.metrics.n_lead), table_cell(cell.metrics.recall_lead),
                       table_cell(cell.metrics.far), table_cell(cell.metrics.median_lead),
                       table_cell(cell.metrics.lead_ci.lo), table_cell(cell.metrics.lead_ci.hi),
                       point});
        }
        save_table_pair(path("calibration"), t);
        write_run_log();
        return t;
    }

    // One-axis-at-a-time overrides of the headline detector's pipeline;
    // writes ablation.csv/.txt. The headline is the first configured detector.
    TextTable run_ablation() {
        if (cfg_.detectors.empty())
            throw std::invalid_argument("config: ablation needs at least one detector");
        write_file(path("config.json"), canon_.dump(2) + "\n");

        TextTable t;
        t.columns = {"row",        "axis",       "value", "n_lead", "recall_lead",
                     "recall_fire", "far",       "precision", "median_lead"};

        append_ablation_row(t, "headline", AblationRow{});
        for (const auto& row : cfg_.ablation)
            append_ablation_row(t, row.axis + "=" + row.value, row);

        save_table_pair(path("ablation"), t);
        write_run_log();
        return t;
    }

    // computed/cached counters per stage label (for cache-correctness checks)
    const std::map<std::string, std::array<int, 2>>& log() const { return log_; }

  private:
    // --- small helpers ---------------------------------------------------------

    struct Unit {
        double level = 0.0;
        std::uint64_t sim_seed = 0;
        std::string id;
    };

    struct Detection {
        // alarm per detector per unit, unit-major inner order = config order
        std::vector<std::vector<AlarmRecord>> alarms;   // [detector][unit]
        std::vector<UnitMeta> units;
        std::map<std::string, FeatureTable> features;   // id -> table
    };

    static bool positive_label(const std::string& label) {
        return label == "supercritical" || label == "ordered";
    }

    static bool needs_graph(Stage target) { return target != Stage::baselines; }

    static bool needs_features(Stage target) {
        return target == Stage::features || target == Stage::detect ||
               target == Stage::evaluate;
    }

    static bool is_feature_series(const std::string& series) {
        return series == "mean_all" || series == "mean_pos" || series == "frac_neg" ||
               series == "tau_sing" || series == "v_eff";
    }

    std::string path(const std::string& rel) const { return cfg_.out_dir + "/" + rel; }

    std::vector<Unit> units() const {
        std::vector<Unit> out;
        char buf[64];
        for (double level : cfg_.substrate.levels)
            for (int s = 1; s <= cfg_.substrate.seeds_per_level; ++s) {
                Unit u;
                u.level = level;
                u.sim_seed = cfg_.seed + static_cast<std::uint64_t>(s) - 1;
                if (cfg_.substrate.kind == "cws")
                    std::snprintf(buf, sizeof(buf), "cws-k%.2f-s%03llu", level,
                                  static_cast<unsigned long long>(u.sim_seed));
                else
                    std::snprintf(buf, sizeof(buf), "vicsek-e%.2f-s%03llu", level,
                                  static_cast<unsigned long long>(u.sim_seed));
                u.id = buf;
                out.push_back(std::move(u));
            }
        return out;
    }

    int horizon() const {
        return cfg_.substrate.kind == "cws" ? cfg_.substrate.cws.horizon
                                            : cfg_.substrate.vicsek.horizon;
    }

    ActionTrajectory simulate_unit(const Unit& u) const {
        if (cfg_.substrate.kind == "cws") {
            CwsConfig c = cfg_.substrate.cws;
            c.coupling = u.level;
            c.seed = u.sim_seed;
            return simulate_cws(c);
        }
        VicsekConfig v = cfg_.substrate.vicsek;
        v.noise = u.level;
        v.seed = u.sim_seed;
        return simulate_vicsek(v);
    }

    // --- cache ------------------------------------------------------------------

    void load_cache() {
        const std::string p = path("cache.json");
        if (!std::filesystem::exists(p)) return;
        const auto j = nlohmann::json::parse(read_file(p));
        if (j.value("schema", "") != "geomherd.cache/1") return;
        for (const auto& [key, files] : j.at("entries").items())
            cache_[key] = files.get<std::vector<std::string>>();
    }

    void save_cache() const {
        nlohmann::ordered_json j;
        j["schema"] = "geomherd.cache/1";
        auto entries = nlohmann::ordered_json::object();
        for (const auto& [key, files] : cache_) entries[key] = files;
        j["entries"] = std::move(entries);
        write_file(path("cache.json"), j.dump(2) + "\n");
    }

    static std::string stage_key(const std::string& stage, const nlohmann::ordered_json& spec,
                                 const std::string& upstream) {
        return to_hex(fnv1a64(stage + "\n" + spec.dump() + "\n" + upstream));
    }

    // Run `compute` unless the cache already holds this key with all files
    // present; returns the stage's relative output paths either way.
    std::vector<std::string> ensure(const std::string& label, const std::string& key,
                                    const std::function<std::vector<std::string>()>& compute) {
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            bool all = !it->second.empty();
            for (const auto& rel : it->second)
                if (!std::filesystem::exists(path(rel))) {
                    all = false;
                    break;
                }
            if (all) {
                ++log_[label][1];
                for (const auto& rel : it->second) manifest_files_.insert(rel);
                return it->second;
            }
        }
        auto files = compute();
        std::sort(files.begin(), files.end());
        cache_[key] = files;
        save_cache();
        ++log_[label][0];
        for (const auto& rel : files) manifest_files_.insert(rel);
        return files;
    }

    // --- stages ----------------------------------------------------------------

    struct SimsRef {
        std::string key8;
        std::string dir;  // relative
    };

    nlohmann::ordered_json substrate_spec() const {
        nlohmann::ordered_json spec = canon_.at("substrate");
        spec["seed"] = cfg_.seed;
        return spec;
    }

    SimsRef ensure_sims() {
        const std::string key = stage_key("simulate", substrate_spec(), "");
        SimsRef ref{key.substr(0, 8), "sims-" + key.substr(0, 8)};
        ensure("simulate", key, [&] {
            std::filesystem::create_directories(path(ref.dir));
            const auto us = units();
            std::vector<std::vector<std::string>> per(us.size());
            parallel_for(us.size(), [&](std::size_t i) {
                const auto traj = simulate_unit(us[i]);
                save_trajectory(traj, path(ref.dir + "/" + us[i].id));
                per[i] = {ref.dir + "/" + us[i].id + ".traj", ref.dir + "/" + us[i].id + ".json"};
            });
            std::vector<std::string> files;
            for (auto& p : per) files.insert(files.end(), p.begin(), p.end());
            return files;
        });
        sims_ = ref;
        return ref;
    }

    nlohmann::ordered_json graph_spec() const { return canon_.at("graph"); }

    void ensure_graph(const SimsRef& sims) {
        const std::string key = stage_key("graph", graph_spec(), sims.key8);
        snaps_dir_ = "snaps-" + key.substr(0, 8);
        snaps_key8_ = key.substr(0, 8);
        ensure("graph", key, [&] {
            const auto us = units();
            std::vector<std::vector<std::string>> per(us.size());
            parallel_for(us.size(), [&](std::size_t i) {
                const auto traj = load_trajectory(path(sims.dir + "/" + us[i].id));
                const auto snaps = build_snapshots(traj, cfg_.graph);
                const std::string dir = snaps_dir_ + "/" + us[i].id;
                save_snapshots(snaps, path(dir));
                for (const auto& s : snaps) per[i].push_back(dir + "/" + snapshot_filename(s.t));
            });
            std::vector<std::string> files;
            for (auto& p : per) files.insert(files.end(), p.begin(), p.end());
            return files;
        });
    }

    SeriesConfig series_config() const {
        SeriesConfig sc;
        sc.curvature = cfg_.curvature;
        sc.with_flow = cfg_.flow.enabled;
        sc.flow = cfg_.flow.cfg;
        sc.flow_stride = cfg_.flow.stride;
        sc.flow_max_edges = cfg_.flow.max_edges;
        sc.with_veff = cfg_.veff.enabled;
        sc.veff = cfg_.veff.cfg;
        return sc;
    }

    nlohmann::ordered_json features_spec() const {
        nlohmann::ordered_json spec;
        spec["curvature"] = canon_.at("curvature");
        spec["flow"] = canon_.at("flow");
        spec["veff"] = canon_.at("veff");
        return spec;
    }

    void ensure_features(const SimsRef& sims) {
        const std::string key = stage_key("features", features_spec(), snaps_key8_);
        features_dir_ = "features-" + key.substr(0, 8);
        features_key8_ = key.substr(0, 8);
        ensure("features", key, [&] {
            std::filesystem::create_directories(path(features_dir_));
            const auto us = units();
            std::vector<std::string> files;
            const SeriesConfig sc = series_config();
            // sequential over units: build_feature_table parallelizes inside
            for (const auto& u : us) {
                const auto snaps = load_snapshots(path(snaps_dir_ + "/" + u.id));
                ActionTrajectory traj;
                if (sc.with_veff) traj = load_trajectory(path(sims.dir + "/" + u.id));
                const auto table =
                    build_feature_table(snaps, sc.with_veff ? &traj : nullptr, sc);
                const std::string rel = features_dir_ + "/" + u.id + ".csv";
                save_table(path(rel), table);
                files.push_back(rel);
            }
            return files;
        });
    }

    nlohmann::ordered_json baselines_spec() const {
        nlohmann::ordered_json spec = canon_.at("baselines");
        spec["window"] = cfg_.graph.window;
        spec["stride"] = cfg_.graph.stride;
        return spec;
    }

    void ensure_baselines(const SimsRef& sims) {
        const std::string key = stage_key("baselines", baselines_spec(), sims.key8);
        baselines_dir_ = "baselines-" + key.substr(0, 8);
        ensure("baselines", key, [&] {
            const auto us = units();
            std::vector<std::vector<std::string>> per(us.size());
            const int W = cfg_.graph.window;
            const int S = cfg_.graph.stride;
            parallel_for(us.size(), [&](std::size_t i) {
                const auto traj = load_trajectory(path(sims.dir + "/" + us[i].id));
                const std::string dir = baselines_dir_ + "/" + us[i].id;
                std::filesystem::create_directories(path(dir));
                auto save_series = [&](const std::string& name,
                                       const std::vector<SeriesSample>& pts) {
                    FeatureTable t;
                    t.columns = {"t", name};
                    for (const auto& p : pts)
                        t.rows.push_back({static_cast<double>(p.t), p.x});
                    const std::string rel = dir + "/" + name + ".csv";
                    save_table(path(rel), t);
                    per[i].push_back(rel);
                };
                if (cfg_.baselines.csad) {
                    const auto steps = csad_series(asset_return_rows(traj));
                    save_series("csad", window_mean_series(steps, W, S));
                }
                if (cfg_.baselines.lsv) {
                    std::vector<SeriesSample> pts;
                    for (const auto& p : lsv_series(traj, W, S)) pts.push_back({p.t, p.h});
                    save_series("lsv", pts);
                }
                if (cfg_.baselines.price_graph) {
                    std::vector<SeriesSample> pts;
                    for (const auto& p : price_corr_curvature(traj, W, S, cfg_.curvature))
                        pts.push_back({p.t, p.mean_all});
                    save_series("pcg", pts);
                }
                if (cfg_.baselines.action_mi) {
                    std::vector<SeriesSample> pts;
                    for (const auto& p : action_mi_series(traj, W, S))
                        pts.push_back({p.t, p.mean_mi});
                    save_series("aami", pts);
                }
            });
            std::vector<std::string> files;
            for (auto& p : per) files.insert(files.end(), p.begin(), p.end());
            return files;
        });
    }

    // mean of the per-step series over each trailing window on the grid
    static std::vector<SeriesSample> window_mean_series(const std::vector<double>& per_step,
                                                        int window, int stride) {
        std::vector<SeriesSample> out;
        const int T = static_cast<int>(per_step.size());
        for (int t = window; t <= T; t += stride) {
            double sum = 0.0;
            int n = 0;
            for (int r = t - window; r < t; ++r) {
                if (!std::isfinite(per_step[static_cast<std::size_t>(r)])) continue;
                sum += per_step[static_cast<std::size_t>(r)];
                ++n;
            }
            out.push_back({t, n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN()});
        }
        return out;
    }

    std::vector<UnitMeta> load_unit_meta() const {
        std::vector<UnitMeta> out;
        for (const auto& u : units()) {
            const auto j =
                nlohmann::json::parse(read_file(path(sims_.dir + "/" + u.id + ".json")));
            UnitMeta m;
            m.id = u.id;
            m.level = u.level;
            m.label = j.at("label").get<std::string>();
            m.event_time = j.at("event_time").is_null() ? -1 : j.at("event_time").get<int>();
            out.push_back(std::move(m));
        }
        return out;
    }

    std::vector<SeriesSample> unit_series(const std::string& id,
                                          const std::string& series) const {
        if (is_feature_series(series)) {
            const auto table = load_table(path(features_dir_ + "/" + id + ".csv"));
            if (series == "tau_sing") return tau_sing_series(table, cfg_.flow.cfg.max_iters);
            return table_series(table, series);
        }
        const auto table = load_table(path(baselines_dir_ + "/" + id + "/" + series + ".csv"));
        return table_series(table, series);
    }

    Detection detect_stage() {
        Detection det;
        det.units = load_unit_meta();
        det.alarms.assign(cfg_.detectors.size(), {});

        TextTable alarms;
        alarms.columns = {"trajectory", "detector", "k_sigma", "h_sigma",
                          "fired",      "fire_time", "score"};
        for (const auto& u : det.units) {
            const auto table = load_table(path(features_dir_ + "/" + u.id + ".csv"));
            det.features.emplace(u.id, table);
            for (std::size_t d = 0; d < cfg_.detectors.size(); ++d) {
                const auto& spec = cfg_.detectors[d];
                std::vector<SeriesSample> series;
                if (is_feature_series(spec.series)) {
                    series = spec.series == "tau_sing"
                                 ? tau_sing_series(table, cfg_.flow.cfg.max_iters)
                                 : table_series(table, spec.series);
                } else {
                    series = unit_series(u.id, spec.series);
                }
                const AlarmRecord alarm = run_detector(series, spec.cfg);
                det.alarms[d].push_back(alarm);
                alarms.add_row({u.id, spec.name, table_cell(spec.cfg.k_sigma),
                                table_cell(spec.cfg.h_sigma), alarm.fired ? "1" : "0",
                                table_cell(alarm.fired ? alarm.fire_time : -1),
                                fmt_double(alarm.score)});
            }
        }
        write_file(path("alarms.csv"), render_csv(alarms));
        manifest_files_.insert("alarms.csv");
        return det;
    }

    void evaluate_stage(const Detection& det) {
        std::vector<std::string> names;
        for (const auto& d : cfg_.detectors) names.push_back(d.name);
        std::vector<std::vector<TrajectoryOutcome>> outcomes(cfg_.detectors.size());
        for (std::size_t d = 0; d < cfg_.detectors.size(); ++d)
            for (std::size_t i = 0; i < det.units.size(); ++i) {
                const auto& u = det.units[i];
                outcomes[d].push_back(score_trajectory(u.id, positive_label(u.label),
                                                       u.event_time, det.alarms[d][i]));
            }
        const auto reports =
            pool_detector_outcomes(names, outcomes, cfg_.eval.n_boot, cfg_.seed);

        save_table_pair(path("metrics"), metrics_table(reports));
        manifest_files_.insert("metrics.csv");
        manifest_files_.insert("metrics.txt");

        TextTable contrasts;
        if (cfg_.eval.contrasts) {
            contrasts = contrasts_table(names, outcomes, cfg_.eval.n_boot, cfg_.seed);
        } else {
            contrasts.columns = {"detector_a", "detector_b", "n_paired", "median_diff",
                                 "ci_lo",      "ci_hi",      "p_value"};
        }
        save_table_pair(path("contrasts"), contrasts);
        manifest_files_.insert("contrasts.csv");
        manifest_files_.insert("contrasts.txt");

        const TextTable levels = level_summary(det);
        save_table_pair(path("level_summary"), levels);
        manifest_files_.insert("level_summary.csv");
        manifest_files_.insert("level_summary.txt");

        const auto summary = evaluation_summary(reports, config_hash(cfg_));
        write_file(path("summary.json"), summary.dump(2) + "\n");
        manifest_files_.insert("summary.json");
    }

    // Per-level median curvature at the snapshot nearest each unit's event.
    TextTable level_summary(const Detection& det) const {
        TextTable t;
        t.columns = {"level", "n_units", "n_with_event", "median_kappa_at_event"};
        for (double level : cfg_.substrate.levels) {
            int n_units = 0;
            std::vector<double> kappas;
            for (const auto& u : det.units) {
                const bool same = [&] {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.2f", level);
                    return u.id.find(std::string("-k") + buf + "-") != std::string::npos ||
                           u.id.find(std::string("-e") + buf + "-") != std::string::npos;
                }();
                if (!same) continue;
                ++n_units;
                if (u.event_time < 0) continue;
                const auto it = det.features.find(u.id);
                if (it == det.features.end()) continue;
                const double k = kappa_at(it->second, u.event_time);
                if (std::isfinite(k)) kappas.push_back(k);
            }
            const int n_event = static_cast<int>(kappas.size());
            t.add_row({table_cell(level), table_cell(n_units), table_cell(n_event),
                       table_cell(median_value(kappas))});
        }
        return t;
    }

    // mean_all at the valid snapshot nearest to step `event` (ties -> earlier)
    static double kappa_at(const FeatureTable& table, int event) {
        const int col = table.column_index("mean_all");
        double best = std::numeric_limits<double>::quiet_NaN();
        long best_dist = -1;
        for (const auto& row : table.rows) {
            if (!std::isfinite(row[static_cast<std::size_t>(col)])) continue;
            const long dist = std::labs(static_cast<long>(row[0]) - event);
            if (best_dist < 0 || dist < best_dist) {
                best_dist = dist;
                best = row[static_cast<std::size_t>(col)];
            }
        }
        return best;
    }

    // --- ablation ----------------------------------------------------------------

    // Build the override config for one row; throws on invalid combinations.
    ExperimentConfig override_config(const AblationRow& row) const {
        ExperimentConfig c = cfg_;
        c.detectors = {cfg_.detectors.front()};
        if (row.axis.empty()) return c;  // headline
        auto& head = c.detectors.front();
        if (row.axis == "detector") {
            head.cfg.kind = detector_kind_from_string(row.value);
        } else if (row.axis == "edge_mode") {
            c.graph.mode = edge_mode_from_string(row.value);
        } else if (row.axis == "window") {
            const int w = std::stoi(row.value);
            if (w < 1) throw std::invalid_argument("ablation: window must be positive");
            c.graph.window = w;
        } else if (row.axis == "transport") {
            c.curvature.solver = transport_from_string(row.value);
        } else if (row.axis == "sign_pooling") {
            if (row.value != "off")
                throw std::invalid_argument("ablation: sign_pooling only supports 'off'");
            head.series = "mean_all";
        } else if (row.axis == "flow") {
            if (row.value != "off")
                throw std::invalid_argument("ablation: flow only supports 'off'");
            if (head.series == "tau_sing")
                throw std::invalid_argument(
                    "ablation: cannot drop the flow under a tau_sing headline detector");
            c.flow.enabled = false;
        } else {
            throw std::invalid_argument("ablation: unknown axis " + row.axis);
        }
        return c;
    }

    void append_ablation_row(TextTable& t, const std::string& label, const AblationRow& row) {
        ExperimentConfig c = override_config(row);
        c.out_dir = cfg_.out_dir;  // shared store: unchanged axes hit the cache
        Pipeline sub(std::move(c));
        sub.cache_ = cache_;  // adopt the current cache state
        const auto sims = sub.ensure_sims();
        sub.ensure_graph(sims);
        sub.ensure_features(sims);
        if (!is_feature_series(sub.cfg_.detectors.front().series)) sub.ensure_baselines(sims);

        const auto meta = sub.load_unit_meta();
        std::vector<TrajectoryOutcome> outcomes;
        const auto& spec = sub.cfg_.detectors.front();
        for (const auto& u : meta) {
            const auto series = sub.unit_series(u.id, spec.series);
            const AlarmRecord alarm = run_detector(series, spec.cfg);
            outcomes.push_back(
                score_trajectory(u.id, positive_label(u.label), u.event_time, alarm));
        }
        const PooledMetrics m =
            pool_outcomes(outcomes, cfg_.eval.n_boot, mix_key(cfg_.seed, 0xAB1Aull));

        // fold the sub-run's cache and counters back into this pipeline
        for (const auto& [key, files] : sub.cache_) cache_[key] = files;
        save_cache();
        for (const auto& [stage, counts] : sub.log_) {
            log_[stage][0] += counts[0];
            log_[stage][1] += counts[1];
        }

        t.add_row({label, row.axis.empty() ? "-" : row.axis,
                   row.value.empty() ? "-" : row.value, table_cell(m.n_lead),
                   table_cell(m.recall_lead), table_cell(m.recall_fire), table_cell(m.far),
                   table_cell(m.precision), table_cell(m.median_lead)});
    }

    // --- manifest ----------------------------------------------------------------

    nlohmann::ordered_json finish_manifest(const std::string& status, const std::string& error) {
        nlohmann::ordered_json manifest;
        manifest["schema"] = "geomherd.manifest/1";
        manifest["status"] = status;
        manifest["config_hash"] = config_hash(cfg_);
        if (!error.empty()) manifest["error"] = error;
        auto files = nlohmann::ordered_json::array();
        for (const auto& rel : manifest_files_) {
            if (!std::filesystem::exists(path(rel))) continue;
            nlohmann::ordered_json f;
            f["path"] = rel;
            f["hash"] = hash_file_hex(path(rel));
            f["bytes"] = static_cast<std::uint64_t>(std::filesystem::file_size(path(rel)));
            files.push_back(std::move(f));
        }
        manifest["files"] = std::move(files);
        write_file(path("manifest.json"), manifest.dump(2) + "\n");
        write_run_log();
        return manifest;
    }

    void write_run_log() const {
        nlohmann::ordered_json j;
        j["schema"] = "geomherd.runlog/1";
        auto stages = nlohmann::ordered_json::object();
        for (const auto& [stage, counts] : log_)
            stages[stage] = {{"computed", counts[0]}, {"cached", counts[1]}};
        j["stages"] = std::move(stages);
        write_file(path("run_log.json"), j.dump(2) + "\n");
    }

    ExperimentConfig cfg_;
    nlohmann::ordered_json canon_;
    std::map<std::string, std::vector<std::string>> cache_;
    std::map<std::string, std::array<int, 2>> log_;  // stage -> {computed, cached}
    std::set<std::string> manifest_files_;
    SimsRef sims_;
    std::string snaps_dir_, snaps_key8_;
    std::string features_dir_, features_key8_;
    std::string baselines_dir_;
};

}  // namespace geomherd
