#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/episode.hpp"
#include "openg2g/logistic.hpp"

namespace openg2g {

struct VoltageBand {
    double lo = 0.95;
    double hi = 1.05;
};

// Integration convention shared by all time-integral metrics: left-rectangle
// sums over the n-1 sample intervals, so a constant series integrates to
// exactly duration * value and a zero-duration episode contributes nothing.

// pu*s of band exceedance summed over every bus-phase entry.
inline double integral_voltage_violation(const std::vector<std::vector<double>>& voltages_pu,
                                         const VoltageBand& band, double dt_s) {
    if (voltages_pu.size() < 2) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < voltages_pu.size(); ++k) {
        double step = 0.0;
        for (double v : voltages_pu[k])
            step += std::max(0.0, band.lo - v) + std::max(0.0, v - band.hi);
        acc += step * dt_s;
    }
    return acc;
}

// Time-average of the summed per-model token throughput.
inline double mean_token_throughput(const std::vector<std::vector<double>>& tps_by_model,
                                    double dt_s) {
    (void)dt_s;  // cancels between numerator and the effective horizon
    if (tps_by_model.empty()) return 0.0;
    const std::size_t n = tps_by_model.front().size();
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (const auto& series : tps_by_model)
        for (std::size_t k = 0; k + 1 < n; ++k) acc += series[k];
    return acc / static_cast<double>(n - 1);
}

// Fraction of (step, model) pairs whose observed ITL exceeds the deadline.
inline double latency_violation_rate(const std::vector<std::vector<double>>& itl_by_model,
                                     const std::vector<double>& deadlines_s) {
    if (itl_by_model.empty()) return 0.0;
    std::size_t total = 0, bad = 0;
    for (std::size_t i = 0; i < itl_by_model.size(); ++i) {
        for (double itl : itl_by_model[i]) {
            ++total;
            if (itl > deadlines_s[i]) ++bad;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
}

// Number of adjacent-step batch changes summed over models.
inline std::int64_t batch_switch_count(const std::vector<std::vector<int>>& batch_by_model) {
    std::int64_t count = 0;
    for (const auto& series : batch_by_model)
        for (std::size_t k = 0; k + 1 < series.size(); ++k)
            if (series[k] != series[k + 1]) ++count;
    return count;
}

struct MetricsSummary {
    double integral_voltage_violation_pus = 0.0;
    double mean_throughput_tps = 0.0;
    double latency_violation_rate = 0.0;
    std::int64_t batch_switch_count = 0;
};

inline MetricsSummary compute_metrics(const EpisodeLog& log, const VoltageBand& band = {}) {
    MetricsSummary m;
    const double dt = to_seconds(log.grid_dt);
    m.integral_voltage_violation_pus = integral_voltage_violation(log.voltages_pu, band, dt);
    m.mean_throughput_tps = mean_token_throughput(log.throughput_tps, dt);
    m.latency_violation_rate = latency_violation_rate(log.itl_s, log.itl_deadlines_s);
    m.batch_switch_count = batch_switch_count(log.batch);
    return m;
}

// ------------------------------------------------------------ rl reward ----

struct RewardWeights {
    double w_v = 5000.0;
    double w_t = 0.05;
    double w_l = 0.01;
    double w_s = 0.5;
};

struct RewardModelObs {
    int batch = 0;
    int prev_batch = 0;
    double itl_s = 0.0;
    double itl_deadline_s = 1.0;
    const LogisticFit* throughput_fit = nullptr;  // per replica; ratio cancels replicas
    int max_feasible_batch = 0;
};

// Per-step shaped reward: squared band exceedances, throughput normalized by
// each model's maximum-feasible-batch value, relative latency excess, and a
// log2 batch-switching penalty summed over models.
inline double ppo_reward(const std::vector<double>& voltages_pu, const VoltageBand& band,
                         const std::vector<RewardModelObs>& models, const RewardWeights& w) {
    double p_v = 0.0;
    for (double v : voltages_pu) {
        const double under = std::max(0.0, band.lo - v);
        const double over = std::max(0.0, v - band.hi);
        p_v += under * under + over * over;
    }
    double t_norm = 0.0, p_l = 0.0, p_s = 0.0;
    for (const auto& m : models) {
        const double t_max = (*m.throughput_fit)(log2_batch(m.max_feasible_batch));
        t_norm += t_max > 0 ? (*m.throughput_fit)(log2_batch(m.batch)) / t_max : 0.0;
        p_l += std::max(0.0, (m.itl_s - m.itl_deadline_s) / m.itl_deadline_s);
        p_s += std::abs(log2_batch(m.batch) - log2_batch(m.prev_batch));
    }
    return -w.w_v * p_v + w.w_t * t_norm - w.w_l * p_l - w.w_s * p_s;
}

} // namespace openg2g
