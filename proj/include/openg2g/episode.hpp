#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/events.hpp"

namespace openg2g {

// Full record of one closed-loop run. Everything except the per-datacenter
// power series is sampled on the grid cadence; datacenter power keeps its
// own (usually finer) cadence.
struct EpisodeLog {
    std::uint64_t seed = 0;
    std::string controller;
    std::string scenario_id;
    Rational base_dt{1, 10};
    Rational grid_dt{1, 10};
    double duration_s = 0.0;

    std::vector<std::string> model_labels;   // global order: dc order, deployment order
    std::vector<double> itl_deadlines_s;     // aligned with model_labels
    std::vector<std::string> regulator_ids;
    std::vector<std::string> voltage_labels;  // "bus.phase", voltage-vector order

    // grid cadence series
    std::vector<double> time_s;
    std::vector<std::vector<double>> voltages_pu;     // [step][entry]
    std::vector<double> total_power_w;                // all dcs, three-phase sum
    std::vector<std::vector<int>> batch;              // [model][step]
    std::vector<std::vector<double>> itl_s;           // [model][step]
    std::vector<std::vector<double>> throughput_tps;  // [model][step]
    std::vector<std::vector<double>> taps;            // [regulator][step]

    // datacenter cadence series
    std::vector<std::string> dc_ids;
    std::vector<std::vector<double>> dc_time_s;       // [dc][step]
    std::vector<std::vector<ThreePhase>> dc_power_w;  // [dc][step]

    EventLog events;

    std::size_t grid_steps() const { return time_s.size(); }
};

} // namespace openg2g
