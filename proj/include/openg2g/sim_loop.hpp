#pragma once

#include <set>
#include <string>
#include <vector>

#include "openg2g/clock.hpp"
#include "openg2g/command.hpp"
#include "openg2g/common.hpp"
#include "openg2g/controller.hpp"
#include "openg2g/datacenter.hpp"
#include "openg2g/episode.hpp"
#include "openg2g/grid.hpp"
#include "openg2g/scenario.hpp"

namespace openg2g {

inline void route_command(const Command& cmd, std::vector<Datacenter*>& dcs, Grid& grid) {
    const std::string& target = command_target(cmd);
    if (target == Grid::id()) {
        grid.queue_command(cmd);
        return;
    }
    for (Datacenter* dc : dcs) {
        if (dc->id() == target) {
            dc->queue_command(cmd);
            return;
        }
    }
    throw RoutingError("sim.unknown_target",
                       std::string("command ") + command_kind(cmd) +
                           " targets unknown component \"" + target + "\"");
}

// Deterministic multi-rate loop. Within a base tick the order is fixed:
// datacenters (declaration order), then the grid, then the controller;
// commands emitted at tick t are queued and applied by their target
// immediately before its next step.
inline EpisodeLog run_episode(std::vector<Datacenter*> datacenters, Grid& grid,
                              Controller& controller, const Scenario& scenario,
                              const Rational& duration, const Rational& base_dt,
                              std::uint64_t master_seed) {
    if (duration < Rational(0))
        throw ConfigError("sim.bad_duration", "duration must be nonnegative");
    if (datacenters.empty())
        throw ConfigError("sim.no_datacenters", "episode needs at least one datacenter");
    if (scenario.horizon_s + 1e-9 < to_seconds(duration))
        throw ConfigError("sim.scenario_too_short",
                          "scenario horizon does not cover the episode duration");

    SimulationClock clock(base_dt);
    std::vector<ComponentSchedule> dc_sched;
    std::set<std::string> dc_ids;
    for (const Datacenter* dc : datacenters) {
        dc_sched.emplace_back(dc->dt(), base_dt);
        grid.feeder().datacenter_bus(dc->id());  // must exist on the feeder
        if (!dc_ids.insert(dc->id()).second)
            throw ConfigError("sim.duplicate_datacenter", "duplicate datacenter id: " + dc->id());
    }
    ComponentSchedule grid_sched(grid.dt(), base_dt);
    ComponentSchedule ctrl_sched(controller.dt(), base_dt);

    if (scenario.overlay && !scenario.overlay->datacenter.empty() &&
        !dc_ids.count(scenario.overlay->datacenter))
        throw ConfigError("sim.unknown_target",
                          "overlay targets unknown datacenter " + scenario.overlay->datacenter);

    for (std::size_t d = 0; d < datacenters.size(); ++d) {
        const bool overlay_target =
            scenario.overlay &&
            (scenario.overlay->datacenter == datacenters[d]->id() ||
             (scenario.overlay->datacenter.empty() && d == 0));
        datacenters[d]->reset(&scenario, master_seed, overlay_target);
    }
    grid.reset(&scenario);
    controller.reset();

    EpisodeLog log;
    log.seed = master_seed;
    log.controller = controller.name();
    log.scenario_id = scenario.id;
    log.base_dt = base_dt;
    log.grid_dt = grid.dt();
    log.duration_s = to_seconds(duration);
    log.voltage_labels = grid.voltage_labels();
    for (const auto& r : grid.feeder().regulators) log.regulator_ids.push_back(r.id);
    log.taps.resize(log.regulator_ids.size());

    // labels are globally unique; qualify with the dc id on collision
    std::set<std::string> label_seen, label_dup;
    for (const Datacenter* dc : datacenters)
        for (const auto& l : dc->labels())
            if (!label_seen.insert(l).second) label_dup.insert(l);
    std::vector<std::pair<std::size_t, std::size_t>> model_index;  // (dc, deployment)
    for (std::size_t d = 0; d < datacenters.size(); ++d) {
        log.dc_ids.push_back(datacenters[d]->id());
        for (std::size_t i = 0; i < datacenters[d]->labels().size(); ++i) {
            const std::string& l = datacenters[d]->labels()[i];
            log.model_labels.push_back(label_dup.count(l) ? datacenters[d]->id() + "/" + l : l);
            log.itl_deadlines_s.push_back(datacenters[d]->spec(i).itl_deadline_s);
            model_index.emplace_back(d, i);
        }
    }
    log.batch.resize(model_index.size());
    log.itl_s.resize(model_index.size());
    log.throughput_tps.resize(model_index.size());
    log.dc_time_s.resize(datacenters.size());
    log.dc_power_w.resize(datacenters.size());

    std::vector<std::vector<ThreePhase>> samples(datacenters.size());
    std::vector<ThreePhase> last_delivered(datacenters.size());
    std::vector<const DatacenterState*> dc_states(datacenters.size(), nullptr);

    const std::int64_t n_ticks = boost::rational_cast<std::int64_t>(duration / base_dt);
    for (std::int64_t tick = 0; tick <= n_ticks; ++tick, clock.advance()) {
        const double t = clock.time_s();
        for (std::size_t d = 0; d < datacenters.size(); ++d) {
            if (!dc_sched[d].due(tick)) continue;
            const DatacenterState& s = datacenters[d]->step(t);
            samples[d].push_back(s.power_w);
            log.dc_time_s[d].push_back(t);
            log.dc_power_w[d].push_back(s.power_w);
        }
        if (grid_sched.due(tick)) {
            std::map<std::string, ThreePhase> power;
            for (std::size_t d = 0; d < datacenters.size(); ++d) {
                if (!samples[d].empty()) {
                    ThreePhase mean{};
                    for (const auto& p : samples[d]) mean += p;
                    last_delivered[d] = mean * (1.0 / static_cast<double>(samples[d].size()));
                    samples[d].clear();
                }
                power[datacenters[d]->id()] = last_delivered[d];
            }
            const GridState& gs = grid.step(t, power);
            log.time_s.push_back(t);
            log.voltages_pu.push_back(gs.voltages_pu);
            double total = 0.0;
            for (const Datacenter* dc : datacenters) total += dc->state().power_w.total();
            log.total_power_w.push_back(total);
            for (std::size_t m = 0; m < model_index.size(); ++m) {
                const auto& st = datacenters[model_index[m].first]->state();
                log.batch[m].push_back(st.batch[model_index[m].second]);
                log.itl_s[m].push_back(st.itl_s[model_index[m].second]);
                log.throughput_tps[m].push_back(st.throughput_tps[model_index[m].second]);
            }
            for (std::size_t r = 0; r < gs.taps.size(); ++r) log.taps[r].push_back(gs.taps[r]);
        }
        if (ctrl_sched.due(tick)) {
            for (std::size_t d = 0; d < datacenters.size(); ++d)
                dc_states[d] = &datacenters[d]->state();
            StepContext ctx{clock, dc_states, grid.state(), &log.events};
            for (const Command& cmd : controller.step(ctx)) {
                log.events.emit(t, controller.name(), "command", command_payload(cmd));
                route_command(cmd, datacenters, grid);
            }
        }
    }
    return log;
}

} // namespace openg2g
