#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/controllers.hpp"
#include "openg2g/datacenter.hpp"
#include "openg2g/feeder.hpp"
#include "openg2g/grid.hpp"
#include "openg2g/io.hpp"
#include "openg2g/metrics.hpp"
#include "openg2g/scenario.hpp"
#include "openg2g/sim_loop.hpp"
#include "openg2g/trace.hpp"

namespace openg2g {

// Single-document run description. Paths are resolved against the config
// file's directory; the fully resolved JSON (defaults filled in, overrides
// applied) is what gets hashed and embedded in outputs.
struct RunConfig {
    nlohmann::json raw;
    std::filesystem::path base_dir = ".";

    std::string resolve_path(const std::string& p) const {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base_dir / fp).string();
    }
    std::uint64_t seed() const { return raw.value("seed", std::uint64_t{0}); }
    Rational base_dt() const { return rational_seconds(raw.value("base_dt_s", 0.1)); }
    Rational duration() const { return rational_seconds(raw.value("duration_s", 3600.0)); }
    std::string output_dir() const { return resolve_path(raw.value("output_dir", "out")); }
    std::string hash() const { return config_hash(raw); }
};

inline nlohmann::json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError("config.open_failed", std::string("cannot open ") + what + ": " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config.parse_failed", path + ": " + e.what());
    }
}

inline std::uint64_t parse_seed_string(const std::string& s, const std::string& origin) {
    try {
        // stoull tolerates signs and leading whitespace; a seed is digits only
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("not a bare unsigned integer");
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos, 10);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config.bad_seed", origin + ": seed must be an unsigned integer, got \"" +
                                                 s + "\"");
    }
}

// Precedence: config file < OPENG2G_SEED < explicit flag.
inline void apply_seed_overrides(RunConfig& cfg, std::optional<std::uint64_t> flag_seed) {
    if (const char* env = std::getenv("OPENG2G_SEED"))
        cfg.raw["seed"] = parse_seed_string(env, "OPENG2G_SEED");
    if (flag_seed) cfg.raw["seed"] = *flag_seed;
}

inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    cfg.raw = load_json_file(path, "config");
    if (!cfg.raw.is_object()) throw ConfigError("config.bad_document", path + ": expected object");
    cfg.base_dir = std::filesystem::path(path).parent_path();
    return cfg;
}

// Everything a run needs, with ownership in one place. The feeder lives on
// the heap: the grid keeps a pointer into it, and a by-value member would
// invalidate that pointer whenever the Simulation itself moves.
struct Simulation {
    std::unique_ptr<FeederModel> feeder;
    std::vector<std::unique_ptr<TraceStore>> trace_stores;
    std::vector<std::unique_ptr<Datacenter>> datacenters;
    std::unique_ptr<Grid> grid;
    std::unique_ptr<Controller> controller;
    ControllerEnv env;  // kept for rebuilding controllers against the same run

    std::vector<Datacenter*> dc_ptrs() {
        std::vector<Datacenter*> ptrs;
        for (auto& dc : datacenters) ptrs.push_back(dc.get());
        return ptrs;
    }
    std::vector<std::string> dc_ids() const {
        std::vector<std::string> ids;
        for (const auto& dc : datacenters) ids.push_back(dc->id());
        return ids;
    }
    void set_controller(const std::string& name, const nlohmann::json& params) {
        controller = make_controller(name, params, env);
    }
};

inline ThreePhase phase_share_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("config.bad_phase_share", "phase_share must be [a, b, c]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Simulation build_simulation(const RunConfig& cfg) {
    Simulation sim;
    if (!cfg.raw.contains("feeder"))
        throw ConfigError("config.missing_field", "config needs a \"feeder\" path");
    sim.feeder = std::make_unique<FeederModel>(
        load_feeder(cfg.resolve_path(cfg.raw.at("feeder").get<std::string>())));

    const nlohmann::json grid_cfg = cfg.raw.value("grid", nlohmann::json::object());
    SweepOptions opt;
    opt.tolerance_pu = grid_cfg.value("tolerance_pu", opt.tolerance_pu);
    opt.max_iterations = grid_cfg.value("max_iterations", opt.max_iterations);
    opt.collapse_floor_pu = grid_cfg.value("collapse_floor_pu", opt.collapse_floor_pu);
    sim.grid = std::make_unique<Grid>(*sim.feeder, rational_seconds(grid_cfg.value("dt_s", 0.1)),
                                      opt);

    if (!cfg.raw.contains("datacenters") || !cfg.raw.at("datacenters").is_array() ||
        cfg.raw.at("datacenters").empty())
        throw ConfigError("config.missing_field", "config needs a nonempty \"datacenters\" array");
    for (const auto& dj : cfg.raw.at("datacenters")) {
        const std::string id = dj.at("id").get<std::string>();
        const TraceStore* traces = nullptr;
        if (dj.contains("trace_store")) {
            auto store = std::make_unique<TraceStore>(
                load_trace_store(cfg.resolve_path(dj.at("trace_store").get<std::string>())));
            traces = store.get();
            sim.trace_stores.push_back(std::move(store));
        }
        std::vector<DeploymentConfig> deployments;
        ControllerEnv::DcInfo info;
        info.id = id;
        for (const auto& mj : dj.at("deployments")) {
            DeploymentConfig dep;
            dep.spec = std::make_shared<InferenceModelSpec>(
                load_model_spec(cfg.resolve_path(mj.at("spec").get<std::string>())));
            dep.initial_batch = mj.value("initial_batch", 128);
            dep.initial_replicas = mj.at("replicas").get<int>();
            if (mj.contains("phase_share"))
                dep.phase_share = phase_share_from_json(mj.at("phase_share"));
            info.specs.push_back(dep.spec);
            info.phase_shares.push_back(dep.phase_share);
            deployments.push_back(std::move(dep));
        }
        sim.datacenters.push_back(std::make_unique<Datacenter>(
            id, rational_seconds(dj.value("dt_s", 0.1)), dj.value("base_load_w", 0.0),
            std::move(deployments), traces));
        sim.env.dcs.push_back(std::move(info));
    }
    sim.env.grid = sim.grid.get();

    const nlohmann::json ctrl = cfg.raw.value("controller", nlohmann::json::object());
    sim.set_controller(ctrl.value("name", "none"), ctrl.value("params", nlohmann::json()));
    return sim;
}

inline std::vector<std::string> pv_profile_ids(const FeederModel& f) {
    std::set<std::string> ids;
    for (const auto& p : f.pv)
        if (!p.profile.empty()) ids.insert(p.profile);
    return {ids.begin(), ids.end()};
}

inline std::vector<std::string> tvl_profile_ids(const FeederModel& f) {
    std::set<std::string> ids;
    for (const auto& l : f.loads)
        if (!l.profile.empty()) ids.insert(l.profile);
    return {ids.begin(), ids.end()};
}

inline SamplingConfig sampling_from_config(const RunConfig& cfg) {
    SamplingConfig sc;
    if (cfg.raw.contains("sampling")) cfg.raw.at("sampling").get_to(sc);
    return sc;
}

// Scenario sources: {"source": "canonical"} (default), {"source": "seed",
// "seed": N}, {"source": "file", "path": ...}, {"source": "library",
// "path": ..., "index": k}.
inline Scenario resolve_scenario(const RunConfig& cfg, const Simulation& sim) {
    const nlohmann::json sj = cfg.raw.value("scenario", nlohmann::json::object());
    const std::string source = sj.value("source", "canonical");
    if (source == "canonical") {
        const double horizon = std::max(3600.0, to_seconds(cfg.duration()));
        return canonical_scenario(pv_profile_ids(*sim.feeder), tvl_profile_ids(*sim.feeder),
                                  sim.dc_ids(), horizon);
    }
    if (source == "seed") {
        if (!sj.contains("seed"))
            throw ConfigError("config.missing_field", "scenario source \"seed\" needs a seed");
        return sample_scenario(sj.at("seed").get<std::uint64_t>(), sampling_from_config(cfg),
                               pv_profile_ids(*sim.feeder), tvl_profile_ids(*sim.feeder),
                               sim.dc_ids());
    }
    if (source == "file") {
        const auto j = load_json_file(cfg.resolve_path(sj.at("path").get<std::string>()),
                                      "scenario");
        return j.get<Scenario>();
    }
    if (source == "library") {
        const auto j = load_json_file(cfg.resolve_path(sj.at("path").get<std::string>()),
                                      "library");
        const auto& accepted = j.at("accepted");
        const std::size_t index = sj.value("index", 0u);
        if (index >= accepted.size())
            throw ConfigError("config.bad_scenario",
                              "library index " + std::to_string(index) + " out of range (" +
                                  std::to_string(accepted.size()) + " accepted)");
        return accepted.at(index).at("scenario").get<Scenario>();
    }
    throw ConfigError("config.bad_scenario", "unknown scenario source \"" + source +
                                                 "\" (valid: canonical, seed, file, library)");
}

struct RunResult {
    EpisodeLog log;
    MetricsSummary metrics;
};

inline RunResult run_from_config(const RunConfig& cfg) {
    Simulation sim = build_simulation(cfg);
    const Scenario scenario = resolve_scenario(cfg, sim);
    RunResult r;
    r.log = run_episode(sim.dc_ptrs(), *sim.grid, *sim.controller, scenario, cfg.duration(),
                        cfg.base_dt(), cfg.seed());
    r.metrics = compute_metrics(r.log);
    return r;
}

// episode.csv + events.jsonl + summary.json + the resolved config itself
inline void write_run_outputs(const RunConfig& cfg, const RunResult& r) {
    const std::filesystem::path dir(cfg.output_dir());
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("io.mkdir_failed", "cannot create " + dir.string());
    write_episode_csv(r.log, (dir / "episode.csv").string());
    write_events_jsonl(r.log, (dir / "events.jsonl").string());
    write_summary_json(r.log, r.metrics, cfg.hash(), (dir / "summary.json").string());
    auto out = open_output((dir / "config.json").string());
    out << cfg.raw.dump(2) << "\n";
}

} // namespace openg2g
