#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/feeder.hpp"

namespace openg2g {

struct SweepOptions {
    double tolerance_pu = 1e-8;   // max per-phase voltage change between sweeps
    int max_iterations = 100;
    double collapse_floor_pu = 1e-3;  // below this magnitude the case is declared diverged
};

// Feeder lowered to index arrays for the solver hot path: buses in model
// order, lines topologically sorted (parent before child).
class CompiledFeeder {
public:
    struct CLine {
        int from = 0, to = 0;
        ImpedanceMatrix z{};
        std::array<bool, 3> has_phase{};
        int regulator = -1;  // index into reg order, -1 if none
    };

    explicit CompiledFeeder(const FeederModel& model) : model_(&model) {
        validate(model);
        for (std::size_t i = 0; i < model.buses.size(); ++i)
            bus_index_[model.buses[i].id] = static_cast<int>(i);
        source_ = bus_index_.at(model.source_bus);

        std::map<std::string, int> reg_of_line;
        for (std::size_t r = 0; r < model.regulators.size(); ++r)
            reg_of_line[model.regulators[r].line] = static_cast<int>(r);

        // children adjacency, then a DFS from the source gives topological order
        std::vector<std::vector<int>> children(model.buses.size());
        std::vector<CLine> raw(model.lines.size());
        for (std::size_t i = 0; i < model.lines.size(); ++i) {
            const Line& l = model.lines[i];
            CLine c;
            c.from = bus_index_.at(l.from);
            c.to = bus_index_.at(l.to);
            c.z = l.z_ohm;
            for (Phase p : l.phases) c.has_phase[static_cast<int>(p)] = true;
            auto it = reg_of_line.find(l.id);
            if (it != reg_of_line.end()) c.regulator = it->second;
            children[c.from].push_back(static_cast<int>(i));
            raw[i] = c;
        }
        std::vector<int> stack{source_};
        while (!stack.empty()) {
            const int b = stack.back();
            stack.pop_back();
            for (int li : children[b]) {
                lines_.push_back(raw[li]);
                stack.push_back(raw[li].to);
            }
        }

        // stable voltage-vector ordering: bus-major in model order, phase-minor
        v_offset_.assign(model.buses.size(), {-1, -1, -1});
        for (std::size_t b = 0; b < model.buses.size(); ++b)
            for (Phase p : model.buses[b].phases) {
                v_offset_[b][static_cast<int>(p)] = static_cast<int>(v_entries_.size());
                v_entries_.push_back({static_cast<int>(b), p});
            }
    }

    const FeederModel& model() const { return *model_; }
    int bus_count() const { return static_cast<int>(model_->buses.size()); }
    int source() const { return source_; }
    int bus_index(const std::string& id) const {
        auto it = bus_index_.find(id);
        if (it == bus_index_.end())
            throw ConfigError("feeder.unknown_bus", "unknown bus: " + id);
        return it->second;
    }
    const std::vector<CLine>& lines() const { return lines_; }
    double v_base(int bus) const { return model_->buses[bus].v_base_ln_v; }
    bool bus_has_phase(int bus, Phase p) const {
        return v_offset_[bus][static_cast<int>(p)] >= 0;
    }

    // voltage-vector index map: (bus, phase) -> flat index, -1 when absent
    int v_index(int bus, Phase p) const { return v_offset_[bus][static_cast<int>(p)]; }
    const std::vector<std::pair<int, Phase>>& v_entries() const { return v_entries_; }

private:
    const FeederModel* model_;
    std::map<std::string, int> bus_index_;
    int source_ = 0;
    std::vector<CLine> lines_;
    std::vector<std::array<int, 3>> v_offset_;
    std::vector<std::pair<int, Phase>> v_entries_;
};

using PhasorArray = std::vector<std::array<Complex, 3>>;  // per bus, zeros at absent phases
using PowerArray = std::vector<std::array<Complex, 3>>;   // load-positive complex power, W

namespace detail {

inline std::array<Complex, 3> nominal_rotations() {
    const double th = 2.0 * M_PI / 3.0;
    return {Complex(1.0, 0.0), std::polar(1.0, -th), std::polar(1.0, th)};
}

} // namespace detail

inline PhasorArray flat_start(const CompiledFeeder& cf) {
    const auto rot = detail::nominal_rotations();
    PhasorArray v(cf.bus_count());
    for (int b = 0; b < cf.bus_count(); ++b)
        for (int p = 0; p < 3; ++p)
            v[b][p] = cf.bus_has_phase(b, static_cast<Phase>(p))
                          ? rot[p] * (cf.model().source_pu * cf.v_base(b))
                          : Complex(0, 0);
    return v;
}

// Backward/forward sweep with current summation. `taps` is one per-phase
// ratio per regulator (model order); `loads_w` is total constant-power load
// per bus-phase (PV shows up as negative P, capacitors as negative Q).
// Returns iterations used; voltages are left in `v`.
inline int sweep_solve(const CompiledFeeder& cf, const PowerArray& loads_w,
                       const std::vector<double>& taps, PhasorArray& v,
                       const SweepOptions& opt = {}) {
    const int nb = cf.bus_count();
    const auto rot = detail::nominal_rotations();
    for (int p = 0; p < 3; ++p)
        if (cf.bus_has_phase(cf.source(), static_cast<Phase>(p)))
            v[cf.source()][p] = rot[p] * (cf.model().source_pu * cf.v_base(cf.source()));

    std::vector<std::array<Complex, 3>> node_current(nb);
    std::vector<std::array<Complex, 3>> line_current(cf.lines().size());

    double max_delta = 0.0;
    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        // nodal injection currents from the constant-power loads
        for (int b = 0; b < nb; ++b) {
            for (int p = 0; p < 3; ++p) {
                if (!cf.bus_has_phase(b, static_cast<Phase>(p))) {
                    node_current[b][p] = Complex(0, 0);
                    continue;
                }
                const Complex s = loads_w[b][p];
                if (s == Complex(0, 0)) {
                    node_current[b][p] = Complex(0, 0);
                    continue;
                }
                const double vm = std::abs(v[b][p]);
                if (vm < opt.collapse_floor_pu * cf.v_base(b))
                    throw DivergenceError("grid.divergence",
                                          "voltage collapse at bus " + cf.model().buses[b].id, vm);
                node_current[b][p] = std::conj(s / v[b][p]);
            }
        }
        // backward: accumulate branch currents leaf -> root
        const auto& lines = cf.lines();
        for (int li = static_cast<int>(lines.size()) - 1; li >= 0; --li) {
            const auto& L = lines[li];
            for (int p = 0; p < 3; ++p)
                line_current[li][p] = L.has_phase[p] ? node_current[L.to][p] : Complex(0, 0);
            const double tap = L.regulator >= 0 ? taps[L.regulator] : 1.0;
            for (int p = 0; p < 3; ++p)
                if (L.has_phase[p]) node_current[L.from][p] += tap * line_current[li][p];
        }
        // forward: drop voltages root -> leaf
        max_delta = 0.0;
        for (std::size_t li = 0; li < lines.size(); ++li) {
            const auto& L = lines[li];
            const double tap = L.regulator >= 0 ? taps[L.regulator] : 1.0;
            for (int p = 0; p < 3; ++p) {
                if (!L.has_phase[p]) continue;
                Complex drop(0, 0);
                for (int q = 0; q < 3; ++q)
                    if (L.has_phase[q]) drop += L.z[p][q] * line_current[li][q];
                const Complex vn = tap * v[L.from][p] - drop;
                const double d = std::abs(vn - v[L.to][p]) / cf.v_base(L.to);
                max_delta = std::max(max_delta, d);
                v[L.to][p] = vn;
            }
        }
        if (max_delta < opt.tolerance_pu) return iter;
    }
    throw DivergenceError("grid.divergence",
                          "power flow did not converge in " +
                              std::to_string(opt.max_iterations) + " iterations",
                          max_delta);
}

// Self-contained solve result for the public one-shot interface.
struct BusVoltages {
    struct Entry {
        std::string bus;
        Phase phase = Phase::A;
        Complex phasor_v;
        double v_base_ln_v = 0.0;
        double pu() const { return std::abs(phasor_v) / v_base_ln_v; }
    };
    std::vector<Entry> entries;  // bus-major (feeder order), phase-minor
    int iterations = 0;

    const Entry& at(const std::string& bus, Phase p) const {
        for (const auto& e : entries)
            if (e.bus == bus && e.phase == p) return e;
        throw ConfigError("grid.unknown_bus_phase", "no entry for " + bus);
    }
};

using InjectionMap = std::map<std::pair<std::string, Phase>, Complex>;

inline BusVoltages solve_power_flow(const FeederModel& feeder, const InjectionMap& loads_w,
                                    const std::map<std::string, double>& taps = {},
                                    const SweepOptions& opt = {}) {
    CompiledFeeder cf(feeder);
    PowerArray s(cf.bus_count());
    for (const auto& [key, val] : loads_w) {
        const int b = cf.bus_index(key.first);
        if (!cf.bus_has_phase(b, key.second))
            throw ConfigError("grid.bad_injection",
                              key.first + " lacks phase " + phase_letter(key.second));
        s[b][static_cast<int>(key.second)] += val;
    }
    std::vector<double> tap_vec;
    for (const auto& r : feeder.regulators) {
        auto it = taps.find(r.id);
        tap_vec.push_back(it != taps.end() ? it->second : r.tap);
    }
    for (const auto& [id, _] : taps)
        if (!feeder.regulator(id))
            throw ConfigError("grid.unknown_regulator", "unknown regulator: " + id);

    PhasorArray v = flat_start(cf);
    const int iters = sweep_solve(cf, s, tap_vec, v, opt);

    BusVoltages out;
    out.iterations = iters;
    for (const auto& [b, p] : cf.v_entries())
        out.entries.push_back({feeder.buses[b].id, p, v[b][static_cast<int>(p)],
                               feeder.buses[b].v_base_ln_v});
    return out;
}

} // namespace openg2g
