#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "openg2g/clock.hpp"
#include "openg2g/command.hpp"
#include "openg2g/common.hpp"
#include "openg2g/datacenter.hpp"
#include "openg2g/events.hpp"
#include "openg2g/grid.hpp"
#include "openg2g/model_spec.hpp"

namespace openg2g {

// Nearest ladder entry to 2^x in batch space; ties break toward the
// smaller batch.
inline int snap_to_ladder(double x, const std::vector<int>& ladder) {
    if (ladder.empty()) throw ConfigError("controller.empty_ladder", "empty ladder");
    const double target = std::exp2(x);
    int best = ladder.front();
    double best_d = std::abs(ladder.front() - target);
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        const double d = std::abs(ladder[i] - target);
        if (d < best_d) {
            best = ladder[i];
            best_d = d;
        }
    }
    return best;
}

// Continuous controller state in x = log2(batch), bounded by the model's
// feasible set.
struct LogBatchState {
    double x = 0.0;
    double x_prev = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;

    static LogBatchState init(const InferenceModelSpec& spec, int batch) {
        LogBatchState s;
        s.x = s.x_prev = log2_batch(batch);
        s.x_lo = log2_batch(spec.min_feasible());
        s.x_hi = log2_batch(spec.max_feasible());
        return s;
    }
    double project(double v) const { return std::clamp(v, x_lo, x_hi); }
};

// What a controller may observe and touch. Controllers are constructed
// against this; per-datacenter internal state lines up with `dcs`.
struct ControllerEnv {
    struct DcInfo {
        std::string id;
        std::vector<std::shared_ptr<const InferenceModelSpec>> specs;  // deployment order
        std::vector<ThreePhase> phase_shares;  // optional; defaults to equal split
    };
    std::vector<DcInfo> dcs;
    Grid* grid = nullptr;
};

struct StepContext {
    const SimulationClock& clock;
    const std::vector<const DatacenterState*>& dc_states;  // aligned with env.dcs
    const GridState& grid_state;
    EventSink* events = nullptr;
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual const std::string& name() const = 0;
    virtual const Rational& dt() const = 0;
    virtual void reset() = 0;
    virtual std::vector<Command> step(const StepContext& ctx) = 0;
};

} // namespace openg2g
