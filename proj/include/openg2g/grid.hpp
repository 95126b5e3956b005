#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "openg2g/clock.hpp"
#include "openg2g/command.hpp"
#include "openg2g/common.hpp"
#include "openg2g/feeder.hpp"
#include "openg2g/power_flow.hpp"
#include "openg2g/scenario.hpp"

namespace openg2g {

struct GridState {
    double time_s = 0.0;
    std::vector<double> voltages_pu;  // aligned with the feeder's voltage index
    std::vector<Complex> phasors_v;
    std::vector<double> taps;  // regulator order as in the feeder
    int iterations = 0;

    double min_pu() const { return *std::min_element(voltages_pu.begin(), voltages_pu.end()); }
    double max_pu() const { return *std::max_element(voltages_pu.begin(), voltages_pu.end()); }
};

// 3M x 3 finite-difference sensitivity of the voltage vector (pu) to
// per-phase active-power injections (W) at one bus.
struct SensitivityMatrix {
    std::vector<std::array<double, 3>> rows;  // aligned with the voltage index
    double at(int row, int phase) const { return rows[row][phase]; }
};

enum class SensitivityScheme { Central, Forward };

class Grid {
public:
    Grid(const FeederModel& feeder, Rational dt, SweepOptions opt = {})
        : feeder_(&feeder), compiled_(feeder), dt_(dt), options_(opt) {
        if (dt_ <= Rational(0)) throw ConfigError("grid.bad_dt", "grid dt must be positive");
        for (const auto& r : feeder.regulators) taps_.push_back(snap_tap(r, r.tap));
        for (const auto& d : feeder.datacenters)
            dc_bus_[d.id] = compiled_.bus_index(d.bus);
        reset(nullptr);
    }

    static constexpr const char* id() { return "grid"; }
    const Rational& dt() const { return dt_; }
    const FeederModel& feeder() const { return *feeder_; }
    const CompiledFeeder& compiled() const { return compiled_; }

    void reset(const Scenario* scenario) {
        scenario_ = scenario;
        v_ = flat_start(compiled_);
        taps_.clear();
        for (const auto& r : feeder_->regulators) taps_.push_back(snap_tap(r, r.tap));
        pending_.clear();
        has_state_ = false;
        state_ = GridState{};
    }

    void queue_command(const Command& c) {
        if (!std::holds_alternative<SetTaps>(c))
            throw RoutingError("grid.bad_command",
                               std::string("grid cannot accept ") + command_kind(c));
        pending_.push_back(std::get<SetTaps>(c));
    }

    // Snap to the regulator's step grid (anchored at ratio 1.0), then clamp.
    static double snap_tap(const RegulatorSpec& r, double tap) {
        const double snapped = 1.0 + std::llround((tap - 1.0) / r.step) * r.step;
        return std::clamp(snapped, r.tap_min, r.tap_max);
    }

    void apply_pending_commands() {
        for (const auto& cmd : pending_) {
            for (const auto& [reg_id, tap] : cmd.taps) {
                bool found = false;
                for (std::size_t i = 0; i < feeder_->regulators.size(); ++i) {
                    if (feeder_->regulators[i].id == reg_id) {
                        taps_[i] = snap_tap(feeder_->regulators[i], tap);
                        found = true;
                        break;
                    }
                }
                if (!found)
                    throw ConfigError("grid.unknown_regulator", "unknown regulator: " + reg_id);
            }
        }
        pending_.clear();
    }

    // One grid step: assemble injections at time t (static loads and PV under
    // their scenario profiles, capacitors, mean datacenter power per phase)
    // and re-solve from the previous solution.
    const GridState& step(double t, const std::map<std::string, ThreePhase>& dc_power_w) {
        apply_pending_commands();
        assemble_injections(t, dc_power_w, injections_);
        const int iters = sweep_solve(compiled_, injections_, taps_, v_, options_);
        fill_state(t, iters);
        has_state_ = true;
        return state_;
    }

    const GridState& state() const {
        if (!has_state_) throw ConfigError("grid.no_state", "grid has not stepped yet");
        return state_;
    }
    bool has_state() const { return has_state_; }

    double tap(const std::string& reg_id) const {
        for (std::size_t i = 0; i < feeder_->regulators.size(); ++i)
            if (feeder_->regulators[i].id == reg_id) return taps_[i];
        throw ConfigError("grid.unknown_regulator", "unknown regulator: " + reg_id);
    }

    std::vector<std::string> voltage_labels() const {
        std::vector<std::string> out;
        for (const auto& [b, p] : compiled_.v_entries())
            out.push_back(feeder_->buses[b].id + "." + phase_letter(p));
        return out;
    }

    // Probe-based dv/dp around the injections of the most recent step.
    // Probing the source bus yields an all-zero column: its voltage is held.
    SensitivityMatrix estimate_sensitivity(const std::string& dc_id, double delta_p_w,
                                           SensitivityScheme scheme = SensitivityScheme::Central) {
        if (!has_state_)
            throw ConfigError("grid.no_state", "sensitivity needs a prior grid step");
        if (delta_p_w <= 0)
            throw ConfigError("grid.bad_probe", "probe power must be positive");
        auto it = dc_bus_.find(dc_id);
        if (it == dc_bus_.end())
            throw ConfigError("feeder.unknown_datacenter", "unknown datacenter id: " + dc_id);
        const int bus = it->second;

        SensitivityMatrix h;
        h.rows.assign(compiled_.v_entries().size(), {0.0, 0.0, 0.0});
        PowerArray probe = injections_;
        for (int p = 0; p < 3; ++p) {
            if (!compiled_.bus_has_phase(bus, static_cast<Phase>(p))) continue;
            probe[bus][p] = injections_[bus][p] + delta_p_w;
            const std::vector<double> hi = solve_pu(probe);
            std::vector<double> lo;
            double denom;
            if (scheme == SensitivityScheme::Central) {
                probe[bus][p] = injections_[bus][p] - delta_p_w;
                lo = solve_pu(probe);
                denom = 2.0 * delta_p_w;
            } else {
                lo = state_.voltages_pu;
                denom = delta_p_w;
            }
            probe[bus][p] = injections_[bus][p];
            for (std::size_t r = 0; r < hi.size(); ++r)
                h.rows[r][p] = (hi[r] - lo[r]) / denom;
        }
        return h;
    }

private:
    void assemble_injections(double t, const std::map<std::string, ThreePhase>& dc_power_w,
                             PowerArray& s) const {
        s.assign(compiled_.bus_count(), {Complex(0, 0), Complex(0, 0), Complex(0, 0)});
        for (const auto& l : feeder_->loads) {
            const double f =
                (l.profile.empty() || !scenario_) ? 1.0 : scenario_->tvl_value(l.profile, t);
            s[compiled_.bus_index(l.bus)][static_cast<int>(l.phase)] +=
                Complex(l.kw, l.kvar) * (1000.0 * f);
        }
        for (const auto& p : feeder_->pv) {
            const double f =
                (p.profile.empty() || !scenario_) ? 1.0 : scenario_->pv_value(p.profile, t);
            s[compiled_.bus_index(p.bus)][static_cast<int>(p.phase)] += Complex(-p.kw * 1000.0 * f, 0);
        }
        for (const auto& c : feeder_->capacitors)
            s[compiled_.bus_index(c.bus)][static_cast<int>(c.phase)] += Complex(0, -c.kvar * 1000.0);
        for (const auto& [dc, power] : dc_power_w) {
            auto it = dc_bus_.find(dc);
            if (it == dc_bus_.end())
                throw ConfigError("feeder.unknown_datacenter", "unknown datacenter id: " + dc);
            for (int p = 0; p < 3; ++p) {
                if (power[static_cast<Phase>(p)] == 0.0) continue;
                if (!compiled_.bus_has_phase(it->second, static_cast<Phase>(p)))
                    throw ConfigError("grid.bad_injection",
                                      dc + ": power on a phase its bus lacks");
                s[it->second][p] += Complex(power[static_cast<Phase>(p)], 0);
            }
        }
    }

    std::vector<double> solve_pu(const PowerArray& s) {
        PhasorArray v = v_;  // warm start from the operating point
        sweep_solve(compiled_, s, taps_, v, options_);
        std::vector<double> pu;
        pu.reserve(compiled_.v_entries().size());
        for (const auto& [b, p] : compiled_.v_entries())
            pu.push_back(std::abs(v[b][static_cast<int>(p)]) / compiled_.v_base(b));
        return pu;
    }

    void fill_state(double t, int iters) {
        state_.time_s = t;
        state_.iterations = iters;
        state_.taps = taps_;
        state_.voltages_pu.clear();
        state_.phasors_v.clear();
        for (const auto& [b, p] : compiled_.v_entries()) {
            state_.phasors_v.push_back(v_[b][static_cast<int>(p)]);
            state_.voltages_pu.push_back(std::abs(v_[b][static_cast<int>(p)]) / compiled_.v_base(b));
        }
    }

    const FeederModel* feeder_;
    CompiledFeeder compiled_;
    Rational dt_;
    SweepOptions options_;
    const Scenario* scenario_ = nullptr;
    std::vector<double> taps_;
    std::map<std::string, int> dc_bus_;
    std::deque<SetTaps> pending_;
    PhasorArray v_;
    PowerArray injections_;
    GridState state_;
    bool has_state_ = false;
};

} // namespace openg2g
