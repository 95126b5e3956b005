#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "openg2g/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace openg2g;

TEST_CASE("constant band deficit integrates to depth times duration") {
    // 0.94 pu on one entry for 10 s at dt 0.1: (0.95 - 0.94) * 10 = 0.1 pu*s
    std::vector<std::vector<double>> v(101, std::vector<double>{0.94});
    CHECK(integral_voltage_violation(v, {}, 0.1) == Catch::Approx(0.1).epsilon(1e-12));
    // the last sample is the interval-less endpoint and must not count
    v.back()[0] = 0.0;
    CHECK(integral_voltage_violation(v, {}, 0.1) == Catch::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("violation sums both band edges over all entries") {
    std::vector<std::vector<double>> v(3, std::vector<double>{0.93, 1.08, 1.0});
    // per step: 0.02 under + 0.03 over, two intervals at dt 2
    CHECK(integral_voltage_violation(v, {}, 2.0) == Catch::Approx((0.02 + 0.03) * 2 * 2.0));
    CHECK(integral_voltage_violation(v, {0.90, 1.10}, 2.0) == 0.0);
    CHECK(integral_voltage_violation({}, {}, 1.0) == 0.0);
    CHECK(integral_voltage_violation({{0.5}}, {}, 1.0) == 0.0);  // single sample
}

TEST_CASE("mean throughput is the time average of the summed models") {
    // two models, constant 100 and 200 tok/s -> 300 regardless of dt
    std::vector<std::vector<double>> tps{{100, 100, 100}, {200, 200, 200}};
    CHECK(mean_token_throughput(tps, 0.5) == Catch::Approx(300.0));
    CHECK(mean_token_throughput(tps, 7.0) == Catch::Approx(300.0));
    // left-rectangle: final samples don't count
    tps[0].back() = 1e9;
    tps[1].back() = 1e9;
    CHECK(mean_token_throughput(tps, 1.0) == Catch::Approx(300.0));
    CHECK(mean_token_throughput({}, 1.0) == 0.0);
    CHECK(mean_token_throughput({{42.0}}, 1.0) == 0.0);
}

TEST_CASE("latency violation rate counts every sample of every model") {
    std::vector<std::vector<double>> itl{{0.1, 0.6, 0.2}, {0.9, 0.1, 0.1}};
    const std::vector<double> deadlines{0.5, 0.5};
    CHECK(latency_violation_rate(itl, deadlines) == Catch::Approx(2.0 / 6.0));
    CHECK(latency_violation_rate({}, {}) == 0.0);
    // exactly-at-deadline is not a violation
    CHECK(latency_violation_rate({{0.5}}, {0.5}) == 0.0);
}

TEST_CASE("batch switch count sums adjacent changes across models") {
    CHECK(batch_switch_count({{64, 64, 128, 128, 64}, {32, 32, 32}}) == 2);
    CHECK(batch_switch_count({{64}}) == 0);
    CHECK(batch_switch_count({}) == 0);
}

TEST_CASE("fuzzed logs match the naive reimplementations") {
    std::mt19937_64 g(2024);
    for (int trial = 0; trial < 300; ++trial) {
        CAPTURE(trial);
        const EpisodeLog log = oracle::fuzz_log(g);
        const auto m = compute_metrics(log);
        const double dt = to_seconds(log.grid_dt);

        CHECK(m.integral_voltage_violation_pus ==
              Catch::Approx(oracle::naive_violation(log.voltages_pu, 0.95, 1.05, dt))
                  .margin(1e-15)
                  .epsilon(1e-12));
        CHECK(m.mean_throughput_tps ==
              Catch::Approx(oracle::naive_mean_throughput(log.throughput_tps))
                  .margin(1e-15)
                  .epsilon(1e-12));
        CHECK(m.latency_violation_rate ==
              oracle::naive_latency_rate(log.itl_s, log.itl_deadlines_s));
        CHECK(m.batch_switch_count == oracle::naive_switches(log.batch));
    }
}

TEST_CASE("compute_metrics uses the grid cadence as its dt") {
    EpisodeLog log;
    log.grid_dt = Rational(2);
    log.voltages_pu = {{0.90}, {0.90}, {1.0}};
    const auto m = compute_metrics(log);
    CHECK(m.integral_voltage_violation_pus == Catch::Approx(0.05 * 2 + 0.05 * 2));
}

TEST_CASE("ppo reward shapes each term") {
    const LogisticFit tput{500.0, 100.0, 1.0, 5.0};
    RewardModelObs m;
    m.batch = 128;
    m.prev_batch = 128;
    m.itl_s = 0.1;
    m.itl_deadline_s = 0.5;
    m.throughput_fit = &tput;
    m.max_feasible_batch = 128;
    const RewardWeights w{};

    SECTION("healthy point: pure throughput credit") {
        const double r = ppo_reward({1.0, 1.0}, {}, {m}, w);
        CHECK(r == Catch::Approx(w.w_t * 1.0));  // at max feasible batch
    }
    SECTION("voltage excursions are squared") {
        const double r0 = ppo_reward({1.0}, {}, {m}, w);
        const double r = ppo_reward({0.93}, {}, {m}, w);
        CHECK(r0 - r == Catch::Approx(5000.0 * 0.02 * 0.02));
    }
    SECTION("latency excess is relative to the deadline") {
        auto late = m;
        late.itl_s = 0.75;  // 50% over
        const double r = ppo_reward({1.0}, {}, {late}, w);
        const double r0 = ppo_reward({1.0}, {}, {m}, w);
        CHECK(r0 - r == Catch::Approx(0.01 * 0.5));
    }
    SECTION("switching penalty is log2 distance") {
        auto moved = m;
        moved.prev_batch = 32;  // two ladder rungs
        const double r = ppo_reward({1.0}, {}, {moved}, w);
        const double r0 = ppo_reward({1.0}, {}, {m}, w);
        CHECK(r0 - r == Catch::Approx(0.5 * 2.0));
    }
    SECTION("throughput credit normalizes by the max feasible batch") {
        auto small = m;
        small.batch = 32;
        small.prev_batch = 32;
        const double r = ppo_reward({1.0}, {}, {small}, w);
        const double expected = w.w_t * tput(log2_batch(32)) / tput(log2_batch(128));
        CHECK(r == Catch::Approx(expected));
    }
}
