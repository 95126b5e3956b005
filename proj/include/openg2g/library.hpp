#pragma once

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "openg2g/config.hpp"
#include "openg2g/io.hpp"
#include "openg2g/metrics.hpp"
#include "openg2g/scenario.hpp"
#include "openg2g/sim_loop.hpp"

namespace openg2g {

constexpr double kScreenBaselineFloorPus = 1.0;
constexpr double kScreenRecoveryFloor = 0.70;

struct ScreenRecord {
    std::uint64_t seed = 0;
    bool accepted = false;
    double baseline_pus = 0.0;
    double ofo_pus = 0.0;
    double recovery = 0.0;
    std::string violation_type = "none";  // none | under | over | both
    std::string reason;                   // nonempty when a run diverged
    Scenario scenario;
};

inline std::string classify_violation(const EpisodeLog& log, const VoltageBand& band = {}) {
    bool under = false, over = false;
    for (const auto& step : log.voltages_pu)
        for (double v : step) {
            under = under || v < band.lo;
            over = over || v > band.hi;
        }
    return under && over ? "both" : under ? "under" : over ? "over" : "none";
}

// Shared by screening and evaluation so the two stages judge the same OFO.
inline nlohmann::json controller_params_for(const RunConfig& cfg, const std::string& name) {
    const auto& raw = cfg.raw;
    if (raw.contains("controller_params") && raw.at("controller_params").contains(name))
        return raw.at("controller_params").at(name);
    if (raw.contains("controller") && raw.at("controller").value("name", "") == name)
        return raw.at("controller").value("params", nlohmann::json());
    return nlohmann::json();
}

// Two full episodes: a No-Coordination baseline and an OFO run. Accept iff
// the baseline integral exceeds the floor and OFO recovers enough of it.
inline ScreenRecord screen_scenario(Simulation& sim, const RunConfig& cfg,
                                    const Scenario& scenario) {
    ScreenRecord rec;
    rec.seed = scenario.seed;
    rec.scenario = scenario;
    try {
        sim.set_controller("none", controller_params_for(cfg, "none"));
        EpisodeLog base = run_episode(sim.dc_ptrs(), *sim.grid, *sim.controller, scenario,
                                      cfg.duration(), cfg.base_dt(), scenario.seed);
        rec.baseline_pus =
            integral_voltage_violation(base.voltages_pu, {}, to_seconds(base.grid_dt));
        rec.violation_type = classify_violation(base);
        sim.set_controller("ofo", controller_params_for(cfg, "ofo"));
        EpisodeLog ofo = run_episode(sim.dc_ptrs(), *sim.grid, *sim.controller, scenario,
                                     cfg.duration(), cfg.base_dt(), scenario.seed);
        rec.ofo_pus = integral_voltage_violation(ofo.voltages_pu, {}, to_seconds(ofo.grid_dt));
    } catch (const DivergenceError& e) {
        rec.reason = std::string(e.code()) + ": " + e.what();
        rec.accepted = false;
        return rec;
    }
    rec.recovery = rec.baseline_pus > 0 ? (rec.baseline_pus - rec.ofo_pus) / rec.baseline_pus : 0.0;
    rec.accepted = rec.baseline_pus > kScreenBaselineFloorPus && rec.recovery >= kScreenRecoveryFloor;
    return rec;
}

// Lowest-level worker pool: body(i) over [0, n), each worker on a disjoint
// index stride so results land in preallocated slots deterministically.
template <typename Body>
inline void run_striped(std::size_t n, int workers, Body body) {
    workers = std::max(1, workers);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = static_cast<std::size_t>(w); i < n;
                 i += static_cast<std::size_t>(workers)) {
                if (failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<ScreenRecord> screen_candidates(const RunConfig& cfg, int n_candidates,
                                                   std::uint64_t seed_start, int workers = 1) {
    if (n_candidates < 0)
        throw ConfigError("library.bad_count", "candidate count must be nonnegative");
    std::vector<ScreenRecord> records(static_cast<std::size_t>(n_candidates));
    const SamplingConfig sampling = sampling_from_config(cfg);
    // a probe build validates the config once before any worker spins up
    { Simulation probe = build_simulation(cfg); (void)probe; }
    const int pool = std::min<int>(std::max(1, workers), std::max(1, n_candidates));
    std::vector<std::unique_ptr<Simulation>> sims;
    for (int w = 0; w < pool; ++w)
        sims.push_back(std::make_unique<Simulation>(build_simulation(cfg)));
    run_striped(records.size(), pool, [&](std::size_t i) {
        Simulation& sim = *sims[i % static_cast<std::size_t>(pool)];
        const Scenario sc =
            sample_scenario(seed_start + i, sampling, pv_profile_ids(*sim.feeder),
                            tvl_profile_ids(*sim.feeder), sim.dc_ids());
        records[i] = screen_scenario(sim, cfg, sc);
    });
    return records;
}

inline nlohmann::json library_summary(const std::vector<ScreenRecord>& records) {
    std::size_t accepted = 0, under = 0, over = 0, both = 0;
    double base_sum = 0, ofo_sum = 0, rec_sum = 0;
    for (const auto& r : records) {
        if (!r.accepted) continue;
        ++accepted;
        base_sum += r.baseline_pus;
        ofo_sum += r.ofo_pus;
        rec_sum += r.recovery;
        if (r.violation_type == "under") ++under;
        else if (r.violation_type == "over") ++over;
        else if (r.violation_type == "both") ++both;
    }
    const double n = accepted ? static_cast<double>(accepted) : 1.0;
    return {{"candidates", records.size()},
            {"accepted", accepted},
            {"acceptance_rate", records.empty() ? 0.0 : accepted / static_cast<double>(records.size())},
            {"baseline_mean_pus", base_sum / n},
            {"ofo_mean_pus", ofo_sum / n},
            {"mean_recovery", rec_sum / n},
            {"under_pct", 100.0 * under / n},
            {"over_pct", 100.0 * over / n},
            {"both_pct", 100.0 * both / n}};
}

// Self-contained library document: every candidate's verdict (seed order),
// full scenarios for the accepted ones, and the knobs that produced them.
inline nlohmann::json build_library(const RunConfig& cfg, int n_candidates,
                                    std::uint64_t seed_start, const std::string& tag,
                                    int workers = 1) {
    const std::vector<ScreenRecord> records =
        screen_candidates(cfg, n_candidates, seed_start, workers);
    nlohmann::json lib;
    lib["tag"] = tag;
    lib["seed_start"] = seed_start;
    lib["n_candidates"] = n_candidates;
    lib["config_hash"] = cfg.hash();
    lib["sampling"] = sampling_from_config(cfg);
    lib["ofo_params"] = controller_params_for(cfg, "ofo");
    lib["records"] = nlohmann::json::array();
    lib["accepted"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json rj{{"seed", r.seed},
                          {"accepted", r.accepted},
                          {"baseline_integral_pus", r.baseline_pus},
                          {"ofo_integral_pus", r.ofo_pus},
                          {"recovery", r.recovery},
                          {"violation_type", r.violation_type}};
        if (!r.reason.empty()) rj["reason"] = r.reason;
        lib["records"].push_back(rj);
        if (r.accepted) {
            nlohmann::json aj{{"seed", r.seed},
                              {"baseline_integral_pus", r.baseline_pus},
                              {"ofo_integral_pus", r.ofo_pus},
                              {"recovery", r.recovery},
                              {"violation_type", r.violation_type},
                              {"scenario", r.scenario}};
            lib["accepted"].push_back(std::move(aj));
        }
    }
    lib["summary"] = library_summary(records);
    return lib;
}

inline void write_library(const nlohmann::json& lib, const std::string& path) {
    auto out = open_output(path);
    out << lib.dump(2) << "\n";
}

// Per-episode master seed: varies with the repeat index only, so every
// controller faces identical stochastic draws on a given (scenario, repeat).
inline std::uint64_t evaluation_seed(std::uint64_t scenario_seed, int repeat) {
    return derive_seed(scenario_seed, "evaluate", "repeat:" + std::to_string(repeat));
}

inline std::vector<EvalRow> evaluate_controllers(const RunConfig& cfg, const nlohmann::json& lib,
                                                 const std::vector<std::string>& controllers,
                                                 int n_scenarios, int repeats, int workers = 1) {
    if (!lib.contains("accepted") || !lib.at("accepted").is_array())
        throw ConfigError("library.bad_document", "library has no \"accepted\" array");
    const auto& accepted = lib.at("accepted");
    if (n_scenarios < 0 || static_cast<std::size_t>(n_scenarios) > accepted.size())
        throw ConfigError("library.too_few_scenarios",
                          "requested " + std::to_string(n_scenarios) + " scenarios, library has " +
                              std::to_string(accepted.size()));
    if (repeats <= 0) throw ConfigError("library.bad_repeats", "repeats must be positive");
    if (controllers.empty())
        throw ConfigError("library.no_controllers", "need at least one controller name");

    std::vector<Scenario> scenarios;
    for (int s = 0; s < n_scenarios; ++s)
        scenarios.push_back(accepted.at(s).at("scenario").get<Scenario>());

    struct Job {
        std::size_t c, s;
        int repeat;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < controllers.size(); ++c)
        for (std::size_t s = 0; s < scenarios.size(); ++s)
            for (int r = 0; r < repeats; ++r) jobs.push_back({c, s, r});

    { Simulation probe = build_simulation(cfg); (void)probe; }
    const int pool = std::min<int>(std::max(1, workers), std::max<std::size_t>(1, jobs.size()));
    std::vector<std::unique_ptr<Simulation>> sims;
    for (int w = 0; w < pool; ++w)
        sims.push_back(std::make_unique<Simulation>(build_simulation(cfg)));

    std::vector<EvalRow> rows(jobs.size());
    run_striped(jobs.size(), pool, [&](std::size_t i) {
        const Job& job = jobs[i];
        Simulation& sim = *sims[i % static_cast<std::size_t>(pool)];
        sim.set_controller(controllers[job.c], controller_params_for(cfg, controllers[job.c]));
        const Scenario& sc = scenarios[job.s];
        EpisodeLog log = run_episode(sim.dc_ptrs(), *sim.grid, *sim.controller, sc,
                                     cfg.duration(), cfg.base_dt(),
                                     evaluation_seed(sc.seed, job.repeat));
        rows[i] = {controllers[job.c], sc.id, job.repeat, compute_metrics(log)};
    });
    return rows;
}

struct MetricStats {
    double mean = 0.0, stddev = 0.0;
};

struct ControllerAggregate {
    std::string controller;
    MetricStats violation, throughput, switches, latency;
    std::size_t episodes = 0;
};

inline MetricStats stats_of(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

inline std::vector<ControllerAggregate> aggregate_eval(const std::vector<EvalRow>& rows,
                                                       const std::vector<std::string>& controllers) {
    std::vector<ControllerAggregate> out;
    for (const auto& name : controllers) {
        std::vector<double> v, t, s, l;
        for (const auto& r : rows) {
            if (r.controller != name) continue;
            v.push_back(r.metrics.integral_voltage_violation_pus);
            t.push_back(r.metrics.mean_throughput_tps);
            s.push_back(static_cast<double>(r.metrics.batch_switch_count));
            l.push_back(r.metrics.latency_violation_rate);
        }
        out.push_back({name, stats_of(v), stats_of(t), stats_of(s), stats_of(l), v.size()});
    }
    return out;
}

} // namespace openg2g
