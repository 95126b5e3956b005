#pragma once

// Small shared fixtures: hand-built feeders and model specs for unit tests.

#include <memory>
#include <string>
#include <vector>

#include "openg2g/feeder.hpp"
#include "openg2g/model_spec.hpp"

namespace fixtures {

// Single-phase two-bus feeder: source -> load over one line, optionally
// behind a regulator.
inline openg2g::FeederModel two_bus(double r_ohm, double x_ohm, bool with_regulator = false,
                                    double vbase = 2400.0) {
    using namespace openg2g;
    FeederModel f;
    f.name = "two-bus";
    f.source_bus = "src";
    f.buses.push_back({"src", {Phase::A}, vbase});
    f.buses.push_back({"load", {Phase::A}, vbase});
    Line l;
    l.id = "line";
    l.from = "src";
    l.to = "load";
    l.phases = {Phase::A};
    l.z_ohm[0][0] = Complex(r_ohm, x_ohm);
    f.lines.push_back(l);
    if (with_regulator) f.regulators.push_back({"reg", "line", 1.0, 0.00625, 0.9, 1.1});
    return f;
}

// Balanced three-phase, three-bus feeder with a datacenter at the tail;
// enough structure for grid/controller tests without the full 13-bus file.
inline openg2g::FeederModel three_bus_dc(bool with_regulator = true) {
    using namespace openg2g;
    FeederModel f;
    f.name = "three-bus";
    f.source_bus = "src";
    const double vbase = 2401.777119828843;
    for (const char* id : {"src", "mid", "dc"})
        f.buses.push_back({id, {Phase::A, Phase::B, Phase::C}, vbase});
    auto mkline = [](const std::string& id, const std::string& from, const std::string& to,
                     double r, double x) {
        Line l;
        l.id = id;
        l.from = from;
        l.to = to;
        l.phases = {Phase::A, Phase::B, Phase::C};
        for (int p = 0; p < 3; ++p) {
            l.z_ohm[p][p] = Complex(r, x);
            for (int q = p + 1; q < 3; ++q) {
                l.z_ohm[p][q] = Complex(0.25 * r, 0.3 * x);
                l.z_ohm[q][p] = l.z_ohm[p][q];
            }
        }
        return l;
    };
    f.lines.push_back(mkline("l1", "src", "mid", 0.3, 0.6));
    f.lines.push_back(mkline("l2", "mid", "dc", 0.4, 0.5));
    if (with_regulator) f.regulators.push_back({"reg1", "l1", 1.0, 0.00625, 0.9, 1.1});
    for (int p = 0; p < 3; ++p)
        f.loads.push_back({"mid", static_cast<Phase>(p), 150.0, 50.0, "tvl_main"});
    f.pv.push_back({"dc", Phase::A, 40.0, "pv_main"});
    f.capacitors.push_back({"mid", Phase::B, 30.0});
    f.datacenters.push_back({"dc0", "dc"});
    return f;
}

// Minimal model spec with tunable fits; the ITL fit crosses a 0.5 s deadline
// between batch 128 and 256 so 128 is the largest feasible batch.
inline openg2g::InferenceModelSpec tiny_spec(const std::string& label = "tiny",
                                             double power_floor = 1000.0,
                                             double power_span = 1000.0) {
    openg2g::InferenceModelSpec s;
    s.label = label;
    s.batch_ladder = {8, 16, 32, 64, 128, 256};
    s.feasible_batch_sizes = {8, 16, 32, 64, 128};
    s.itl_deadline_s = 0.5;
    s.gpus_per_replica = 1;
    s.power_fit = {power_floor, power_span, 1.0, 5.5};
    s.throughput_fit = {500.0, 100.0, 1.0, 5.0};
    s.itl_fit = {0.03, 0.9, 1.3, 7.8};
    return s;
}

inline std::shared_ptr<const openg2g::InferenceModelSpec> tiny_spec_ptr(
    const std::string& label = "tiny") {
    return std::make_shared<const openg2g::InferenceModelSpec>(tiny_spec(label));
}

} // namespace fixtures
