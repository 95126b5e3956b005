#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/episode.hpp"
#include "openg2g/metrics.hpp"
#include "openg2g/rng.hpp"

namespace openg2g {

inline std::string config_hash(const nlohmann::json& resolved) {
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx",
             static_cast<unsigned long long>(detail::fnv1a64(resolved.dump())));
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
    if (!out) throw IoError("io.write_failed", "cannot write " + path);
    return out;
}

// Wide per-step table at the grid cadence.
inline void write_episode_csv(const EpisodeLog& log, const std::string& path) {
    auto out = open_output(path);
    out << "time_s,vmin_pu,vmax_pu,total_power_w";
    for (const auto& l : log.model_labels) out << ",batch_size/" << l;
    for (const auto& l : log.model_labels) out << ",itl_s/" << l;
    for (const auto& l : log.model_labels) out << ",throughput_tps/" << l;
    for (const auto& r : log.regulator_ids) out << ",tap/" << r;
    out << "\n";
    for (std::size_t k = 0; k < log.grid_steps(); ++k) {
        const auto& v = log.voltages_pu[k];
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        out << format_double(log.time_s[k]) << ',' << format_double(*mn) << ','
            << format_double(*mx) << ',' << format_double(log.total_power_w[k]);
        for (const auto& series : log.batch) out << ',' << series[k];
        for (const auto& series : log.itl_s) out << ',' << format_double(series[k]);
        for (const auto& series : log.throughput_tps) out << ',' << format_double(series[k]);
        for (const auto& series : log.taps) out << ',' << format_double(series[k]);
        out << "\n";
    }
}

inline void write_events_jsonl(const EpisodeLog& log, const std::string& path) {
    auto out = open_output(path);
    for (const auto& e : log.events.records) {
        nlohmann::json j{{"time_s", e.time_s}, {"source", e.source}, {"kind", e.kind},
                         {"payload", e.payload}};
        out << j.dump() << "\n";
    }
}

inline void write_summary_json(const EpisodeLog& log, const MetricsSummary& m,
                               const std::string& cfg_hash, const std::string& path) {
    nlohmann::json j{{"integral_voltage_violation_pus", m.integral_voltage_violation_pus},
                     {"mean_throughput_tps", m.mean_throughput_tps},
                     {"latency_violation_rate", m.latency_violation_rate},
                     {"batch_switch_count", m.batch_switch_count},
                     {"seed", log.seed},
                     {"controller", log.controller},
                     {"scenario_id", log.scenario_id},
                     {"config_hash", cfg_hash}};
    auto out = open_output(path);
    out << j.dump(2) << "\n";
}

struct EvalRow {
    std::string controller;
    std::string scenario_id;
    int repeat = 0;
    MetricsSummary metrics;
};

// metric column order follows the evaluation table:
// violation, throughput, batch switches, latency violations
inline void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
    auto out = open_output(path);
    out << "controller,scenario_id,repeat,integral_voltage_violation_pus,mean_throughput_tps,"
           "batch_switch_count,latency_violation_rate\n";
    for (const auto& r : rows) {
        out << r.controller << ',' << r.scenario_id << ',' << r.repeat << ','
            << format_double(r.metrics.integral_voltage_violation_pus) << ','
            << format_double(r.metrics.mean_throughput_tps) << ','
            << r.metrics.batch_switch_count << ','
            << format_double(r.metrics.latency_violation_rate) << "\n";
    }
}

} // namespace openg2g
