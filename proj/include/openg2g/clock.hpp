#pragma once

#include <cstdint>

#include "openg2g/common.hpp"

namespace openg2g {

// Integer tick counter over an exact rational base step. time() never drifts
// because it is always tick * base_dt in rational arithmetic.
class SimulationClock {
public:
    explicit SimulationClock(Rational base_dt) : base_dt_(base_dt) {
        if (base_dt_ <= Rational(0))
            throw ConfigError("clock.bad_dt", "base_dt must be positive");
    }

    std::int64_t tick() const { return tick_; }
    const Rational& base_dt() const { return base_dt_; }
    Rational time() const { return base_dt_ * tick_; }
    double time_s() const { return to_seconds(time()); }

    void advance() { ++tick_; }

private:
    Rational base_dt_;
    std::int64_t tick_ = 0;
};

// Fires a component at every exact multiple of its native cadence. The
// cadence must be a positive integer multiple of the loop's base step.
class ComponentSchedule {
public:
    ComponentSchedule(Rational native_dt, const Rational& base_dt) : native_dt_(native_dt) {
        if (!is_positive_multiple(native_dt_, base_dt))
            throw ConfigError("clock.bad_cadence",
                              "component cadence must be a positive integer multiple of base_dt");
        ticks_per_step_ = boost::rational_cast<std::int64_t>(native_dt_ / base_dt);
    }

    const Rational& native_dt() const { return native_dt_; }

    bool due(std::int64_t tick) const { return tick % ticks_per_step_ == 0; }

    // Number of firings over [0, duration]: floor(duration/dt) + 1,
    // including the t = 0 step.
    static std::int64_t step_count(const Rational& duration, const Rational& native_dt) {
        const Rational q = duration / native_dt;
        return boost::rational_cast<std::int64_t>(q) + 1;  // rational_cast truncates
    }

private:
    Rational native_dt_;
    std::int64_t ticks_per_step_ = 1;
};

} // namespace openg2g
