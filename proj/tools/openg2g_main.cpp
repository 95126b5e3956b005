// openg2g command-line front end: run episodes, build scenario libraries,
// evaluate controllers head-to-head, report feasible power ranges.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "openg2g/openg2g.hpp"

namespace {

using namespace openg2g;

// exit codes: 0 ok, 2 config error, 3 divergence, 4 I/O error
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

void print_error(const std::string& code, const std::string& message) {
    nlohmann::json j{{"error", {{"code", code}, {"message", message}}}};
    std::cerr << j.dump() << "\n";
}

std::string absolute_path(const std::string& p) {
    return std::filesystem::absolute(p).lexically_normal().string();
}

struct CommonFlags {
    std::string config_path;
    std::string feeder;
    std::string output_dir;
    double duration_s = -1;
    double base_dt_s = -1;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "run config JSON");
        app->add_option("--feeder", feeder, "feeder JSON (overrides config)");
        app->add_option("--output-dir", output_dir, "output directory (overrides config)");
        app->add_option("--duration", duration_s, "episode duration, seconds");
        app->add_option("--base-dt", base_dt_s, "base tick, seconds");
        std::uint64_t* slot = nullptr;
        app->add_option_function<std::uint64_t>(
            "--seed", [this](const std::uint64_t& v) { seed = v; }, "master seed");
        (void)slot;
    }

    RunConfig load() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = load_run_config(config_path);
        } else {
            cfg.raw = nlohmann::json::object();
        }
        if (!feeder.empty()) cfg.raw["feeder"] = absolute_path(feeder);
        if (!output_dir.empty()) cfg.raw["output_dir"] = absolute_path(output_dir);
        if (duration_s >= 0) cfg.raw["duration_s"] = duration_s;
        if (base_dt_s > 0) cfg.raw["base_dt_s"] = base_dt_s;
        apply_seed_overrides(cfg, seed);
        return cfg;
    }
};

// --scenario forms: canonical | seed:N | file:PATH | library:PATH[:INDEX]
nlohmann::json parse_scenario_flag(const std::string& s) {
    if (s == "canonical") return {{"source", "canonical"}};
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw ConfigError("cli.bad_scenario",
                          "scenario must be canonical, seed:N, file:PATH or library:PATH[:INDEX]");
    const std::string kind = s.substr(0, colon);
    const std::string rest = s.substr(colon + 1);
    if (kind == "seed") return {{"source", "seed"}, {"seed", parse_seed_string(rest, "--scenario")}};
    if (kind == "file") return {{"source", "file"}, {"path", absolute_path(rest)}};
    if (kind == "library") {
        const auto second = rest.rfind(':');
        std::string path = rest;
        std::size_t index = 0;
        if (second != std::string::npos && second + 1 < rest.size() &&
            rest.find_first_not_of("0123456789", second + 1) == std::string::npos) {
            path = rest.substr(0, second);
            index = std::stoull(rest.substr(second + 1));
        }
        return {{"source", "library"}, {"path", absolute_path(path)}, {"index", index}};
    }
    throw ConfigError("cli.bad_scenario", "unknown scenario source \"" + kind + "\"");
}

int cmd_run(const CommonFlags& common, const std::string& controller,
            const std::string& params_json, const std::string& scenario_flag) {
    RunConfig cfg = common.load();
    if (!controller.empty()) {
        cfg.raw["controller"]["name"] = controller;
        if (!cfg.raw["controller"].contains("params"))
            cfg.raw["controller"]["params"] = nlohmann::json::object();
    }
    if (!params_json.empty()) {
        try {
            cfg.raw["controller"]["params"] = nlohmann::json::parse(params_json);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cli.bad_params", std::string("--params: ") + e.what());
        }
    }
    if (!scenario_flag.empty()) cfg.raw["scenario"] = parse_scenario_flag(scenario_flag);

    const RunResult result = run_from_config(cfg);
    write_run_outputs(cfg, result);
    nlohmann::json out{{"output_dir", cfg.output_dir()},
                       {"integral_voltage_violation_pus", result.metrics.integral_voltage_violation_pus},
                       {"mean_throughput_tps", result.metrics.mean_throughput_tps},
                       {"latency_violation_rate", result.metrics.latency_violation_rate},
                       {"batch_switch_count", result.metrics.batch_switch_count}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_build_library(const CommonFlags& common, int n_candidates, std::uint64_t seed_start,
                      const std::string& tag, const std::string& out_path, int workers) {
    RunConfig cfg = common.load();
    const nlohmann::json lib = build_library(cfg, n_candidates, seed_start, tag, workers);
    write_library(lib, out_path);
    const auto& s = lib.at("summary");
    std::printf("library %s: %d candidates from seed %llu, %zu accepted (%.1f%%)\n", tag.c_str(),
                n_candidates, static_cast<unsigned long long>(seed_start),
                s.at("accepted").get<std::size_t>(), 100.0 * s.at("acceptance_rate").get<double>());
    std::printf("  baseline mean %.3f pu*s | ofo mean %.3f pu*s | mean recovery %.1f%%\n",
                s.at("baseline_mean_pus").get<double>(), s.at("ofo_mean_pus").get<double>(),
                100.0 * s.at("mean_recovery").get<double>());
    std::printf("  violation mix: under %.1f%% / over %.1f%% / both %.1f%%\n",
                s.at("under_pct").get<double>(), s.at("over_pct").get<double>(),
                s.at("both_pct").get<double>());
    std::printf("  wrote %s\n", out_path.c_str());
    return 0;
}

std::string fmt_stat(const MetricStats& m, int precision) {
    char buf[64];
    if (m.stddev == 0.0) {
        std::snprintf(buf, sizeof(buf), "%.*f", precision, m.mean);
    } else {
        std::snprintf(buf, sizeof(buf), "%.*f +/- %.*f", precision, m.mean, precision, m.stddev);
    }
    return buf;
}

int cmd_evaluate(const CommonFlags& common, const std::string& library_path,
                 const std::string& controllers_csv, int n_scenarios, int repeats,
                 const std::string& out_path, int workers) {
    RunConfig cfg = common.load();
    const nlohmann::json lib = load_json_file(library_path, "library");
    std::vector<std::string> controllers;
    for (std::size_t pos = 0; pos < controllers_csv.size();) {
        const auto comma = controllers_csv.find(',', pos);
        const auto end = comma == std::string::npos ? controllers_csv.size() : comma;
        if (end > pos) controllers.push_back(controllers_csv.substr(pos, end - pos));
        pos = end + 1;
    }
    if (n_scenarios < 0) n_scenarios = static_cast<int>(lib.at("accepted").size());
    const std::vector<EvalRow> rows =
        evaluate_controllers(cfg, lib, controllers, n_scenarios, repeats, workers);
    write_eval_csv(rows, out_path);

    // metric order mirrors the evaluation table: violation, throughput,
    // batch switches, latency violations
    std::printf("%-14s %-22s %-24s %-18s %s\n", "controller", "violation_pus", "throughput_tps",
                "batch_switches", "latency_viol_rate");
    for (const auto& agg : aggregate_eval(rows, controllers)) {
        std::printf("%-14s %-22s %-24s %-18s %s\n", agg.controller.c_str(),
                    fmt_stat(agg.violation, 4).c_str(), fmt_stat(agg.throughput, 1).c_str(),
                    fmt_stat(agg.switches, 1).c_str(), fmt_stat(agg.latency, 4).c_str());
    }
    std::printf("wrote %s (%zu rows)\n", out_path.c_str(), rows.size());
    return 0;
}

int cmd_power_range(const std::string& spec_path, double target_peak_w, int replicas_flag) {
    const InferenceModelSpec spec = load_model_spec(spec_path);
    int replicas = replicas_flag;
    if (target_peak_w > 0) replicas = match_peak_replicas(spec, target_peak_w);
    if (replicas <= 0)
        throw ConfigError("cli.bad_replicas", "need --replicas or --target-peak-w");
    const PowerRange range = feasible_power_range_w(spec, replicas);
    std::printf("model: %s\n", spec.label.c_str());
    std::printf("match_peak_replicas: %d\n", replicas);
    std::printf("feasible_power_min_w: %s\n", format_double(range.min_w).c_str());
    std::printf("feasible_power_max_w: %s\n", format_double(range.max_w).c_str());
    std::printf("feasible_power_span_w: %s\n", format_double(range.span_w()).c_str());
    std::printf("\nbatch,power_w_per_replica,dc_power_mw,throughput_tps,itl_s,feasible\n");
    for (int b : spec.batch_ladder) {
        const double x = log2_batch(b);
        const double per_replica = spec.power_fit(x);
        std::printf("%d,%s,%s,%s,%s,%d\n", b, format_double(per_replica).c_str(),
                    format_double(per_replica * replicas / 1e6).c_str(),
                    format_double(spec.throughput_fit(x) * replicas).c_str(),
                    format_double(spec.itl_fit(x)).c_str(), spec.is_feasible(b) ? 1 : 0);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"openg2g: datacenter/grid co-simulation"};
    app.require_subcommand(1);

    CommonFlags run_common, lib_common, eval_common;

    auto* run = app.add_subcommand("run", "run one episode and write its outputs");
    run_common.attach(run);
    std::string run_controller, run_params, run_scenario;
    run->add_option("--controller", run_controller, "controller name (overrides config)");
    run->add_option("--params", run_params, "controller params as a JSON string");
    run->add_option("--scenario", run_scenario,
                    "canonical | seed:N | file:PATH | library:PATH[:INDEX]");

    auto* bl = app.add_subcommand("build-library", "screen sampled scenarios into a library");
    lib_common.attach(bl);
    int bl_candidates = 50;
    std::uint64_t bl_seed_start = 0;
    std::string bl_tag = "train", bl_out = "library.json";
    int bl_workers = static_cast<int>(std::thread::hardware_concurrency());
    bl->add_option("--n-candidates", bl_candidates, "seeds to screen");
    bl->add_option("--seed-start", bl_seed_start, "first candidate seed");
    bl->add_option("--tag", bl_tag, "library tag (e.g. train/test)");
    bl->add_option("--output", bl_out, "library JSON path");
    bl->add_option("--workers", bl_workers, "parallel screening workers");

    auto* ev = app.add_subcommand("evaluate", "run controllers across library scenarios");
    eval_common.attach(ev);
    std::string ev_library, ev_controllers = "none,droop,ofo", ev_out = "eval.csv";
    int ev_scenarios = -1, ev_repeats = 1;
    int ev_workers = static_cast<int>(std::thread::hardware_concurrency());
    ev->add_option("--library", ev_library, "library JSON from build-library")->required();
    ev->add_option("--controllers", ev_controllers, "comma-separated controller names");
    ev->add_option("--n-scenarios", ev_scenarios, "library scenarios to use (default: all)");
    ev->add_option("--repeats", ev_repeats, "episodes per (controller, scenario)");
    ev->add_option("--output", ev_out, "eval CSV path");
    ev->add_option("--workers", ev_workers, "parallel evaluation workers");

    auto* pr = app.add_subcommand("power-range", "feasible power range report for a model spec");
    std::string pr_spec;
    double pr_target = 0.0;
    int pr_replicas = 0;
    pr->add_option("--spec", pr_spec, "model spec JSON")->required();
    pr->add_option("--target-peak-w", pr_target, "anchor replicas to this peak power");
    pr->add_option("--replicas", pr_replicas, "explicit replica count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_common, run_controller, run_params, run_scenario);
        if (bl->parsed())
            return cmd_build_library(lib_common, bl_candidates, bl_seed_start, bl_tag, bl_out,
                                     bl_workers);
        if (ev->parsed())
            return cmd_evaluate(eval_common, ev_library, ev_controllers, ev_scenarios, ev_repeats,
                                ev_out, ev_workers);
        if (pr->parsed()) return cmd_power_range(pr_spec, pr_target, pr_replicas);
    } catch (const openg2g::DivergenceError& e) {
        print_error(e.code(), e.what());
        return kExitDivergence;
    } catch (const openg2g::IoError& e) {
        print_error(e.code(), e.what());
        return kExitIo;
    } catch (const openg2g::Error& e) {
        print_error(e.code(), e.what());
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        print_error("config.bad_json", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
