#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "openg2g/controllers.hpp"
#include "openg2g/sim_loop.hpp"
#include "support/fixtures.hpp"

using namespace openg2g;

namespace {

// Emits a fixed command list at scripted whole-second times.
class ScriptedController : public Controller {
public:
    ScriptedController(Rational dt, std::map<long long, std::vector<Command>> script)
        : dt_(dt), name_("scripted"), script_(std::move(script)) {}
    const std::string& name() const override { return name_; }
    const Rational& dt() const override { return dt_; }
    void reset() override {}
    std::vector<Command> step(const StepContext& ctx) override {
        auto it = script_.find(std::llround(ctx.clock.time_s()));
        return it == script_.end() ? std::vector<Command>{} : it->second;
    }

private:
    Rational dt_;
    std::string name_;
    std::map<long long, std::vector<Command>> script_;
};

FeederModel one_phase_feeder() {
    auto f = fixtures::two_bus(1.0, 1.0);
    f.datacenters.push_back({"dc0", "load"});
    return f;
}

// Single-model dc whose whole draw sits on phase A (the only phase present).
Datacenter one_phase_dc(Rational dt, const TraceStore* traces = nullptr, int replicas = 1) {
    DeploymentConfig d;
    d.spec = fixtures::tiny_spec_ptr();
    d.initial_batch = 64;
    d.initial_replicas = replicas;
    d.phase_share = ThreePhase{1.0, 0.0, 0.0};
    return Datacenter("dc0", dt, 0.0, {d}, traces);
}

} // namespace

TEST_CASE("episode step counts follow floor(T/dt)+1 on every cadence") {
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1, 2));
    auto dc = one_phase_dc(Rational(1, 10));
    NoCoordinationController ctrl(Rational(1));
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(10), Rational(1, 10), 0);

    CHECK(log.grid_steps() == 21);  // floor(10 / 0.5) + 1
    CHECK(log.dc_time_s[0].size() == 101);
    CHECK(log.time_s.front() == 0.0);
    CHECK(log.time_s.back() == 10.0);
    CHECK(log.duration_s == 10.0);
    CHECK(log.batch[0].size() == 21);  // model series ride the grid cadence
    CHECK(log.itl_s[0].size() == 21);
    CHECK(log.taps.empty());  // no regulators on this feeder
    CHECK(ComponentSchedule::step_count(Rational(10), Rational(1, 2)) == 21);
    CHECK(ComponentSchedule::step_count(Rational(10), Rational(1, 10)) == 101);
}

TEST_CASE("grid consumes the mean datacenter power since its last step") {
    TraceStore ts;
    ts.add_trace("tiny", 64, {{0.0, 1000.0}, {0.5, 2000.0}, {1.5, 3000.0}, {2.5, 4000.0}});
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1), [] {
        SweepOptions o;
        o.tolerance_pu = 1e-12;
        return o;
    }());
    auto dc = one_phase_dc(Rational(1, 4), &ts);
    NoCoordinationController ctrl(Rational(1));
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(2), Rational(1, 4), 0);

    REQUIRE(log.grid_steps() == 3);
    // grid step at t sees the mean of the dc samples in (t_prev, t]
    const double means[] = {1000.0, (1000.0 + 2000.0 * 3) / 4.0, (2000.0 + 3000.0 * 3) / 4.0};
    for (int k = 0; k < 3; ++k) {
        const auto ref = solve_power_flow(feeder, {{{"load", Phase::A}, Complex(means[k], 0.0)}},
                                          {}, {1e-12, 100, 1e-3});
        CHECK(log.voltages_pu[k][1] == Catch::Approx(ref.at("load", Phase::A).pu()).margin(1e-10));
    }
    // the dc-cadence log keeps the raw samples
    CHECK(log.dc_power_w[0][1].a == 1000.0);  // t = 0.25
    CHECK(log.dc_power_w[0][2].a == 2000.0);  // t = 0.5
}

TEST_CASE("grid holds the last delivered power when the dc cadence is slower") {
    TraceStore ts;
    ts.add_trace("tiny", 64, {{0.0, 1000.0}, {1.5, 50000.0}});
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1));
    auto dc = one_phase_dc(Rational(2), &ts);
    NoCoordinationController ctrl(Rational(1));
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(4), Rational(1), 0);

    REQUIRE(log.grid_steps() == 5);
    // t=1: no new sample, so the same power is re-solved (warm start keeps it
    // within solver tolerance of the t=0 point)
    CHECK(log.voltages_pu[1][1] == Catch::Approx(log.voltages_pu[0][1]).margin(1e-8));
    CHECK(log.voltages_pu[2][1] < log.voltages_pu[1][1] - 1e-4);  // t=2: 50 kW arrives
    CHECK(log.voltages_pu[3][1] == Catch::Approx(log.voltages_pu[2][1]).margin(1e-8));
    CHECK(log.dc_time_s[0] == std::vector<double>{0.0, 2.0, 4.0});
}

TEST_CASE("commands apply before the target's next step, not the current one") {
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1));
    auto dc = one_phase_dc(Rational(1));
    ScriptedController ctrl(Rational(1), {{0, {SetBatchSize{"dc0", {{"tiny", 128}}}}}});
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(3), Rational(1), 0);

    CHECK(log.batch[0] == std::vector<int>{64, 128, 128, 128});
    // the command itself is on the event log at its emission time
    REQUIRE(log.events.records.size() == 1);
    CHECK(log.events.records[0].time_s == 0.0);
    CHECK(log.events.records[0].source == "scripted");
    CHECK(log.events.records[0].kind == "command");
    CHECK(log.events.records[0].payload.at("kind") == "set_batch_size");
    CHECK(log.events.records[0].payload.at("target") == "dc0");
}

TEST_CASE("tap commands route to the grid and land on the next grid step") {
    auto feeder = fixtures::three_bus_dc();  // has reg1 and dc0
    Grid grid(feeder, Rational(1));
    DeploymentConfig d;
    d.spec = fixtures::tiny_spec_ptr();
    d.initial_batch = 64;
    d.initial_replicas = 1;
    Datacenter dc("dc0", Rational(1), 0.0, {d});
    ScriptedController ctrl(Rational(1), {{1, {SetTaps{"grid", {{"reg1", 1.05}}}}}});
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(3), Rational(1), 0);

    REQUIRE(log.regulator_ids == std::vector<std::string>{"reg1"});
    CHECK(log.taps[0] == std::vector<double>{1.0, 1.0, 1.05, 1.05});
}

TEST_CASE("commands to unknown targets abort the episode") {
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1));
    auto dc = one_phase_dc(Rational(1));
    ScriptedController ctrl(Rational(1), {{1, {SetBatchSize{"ghost", {{"tiny", 32}}}}}});
    CHECK_THROWS_AS(run_episode({&dc}, grid, ctrl, Scenario{}, Rational(2), Rational(1), 0),
                    RoutingError);
}

TEST_CASE("episode validation") {
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1));
    auto dc = one_phase_dc(Rational(1));
    NoCoordinationController ctrl(Rational(1));

    SECTION("negative duration") {
        CHECK_THROWS_AS(run_episode({&dc}, grid, ctrl, Scenario{}, Rational(-1), Rational(1), 0),
                        ConfigError);
    }
    SECTION("no datacenters") {
        CHECK_THROWS_AS(run_episode({}, grid, ctrl, Scenario{}, Rational(1), Rational(1), 0),
                        ConfigError);
    }
    SECTION("scenario horizon too short") {
        Scenario sc;
        sc.horizon_s = 5.0;
        CHECK_THROWS_AS(run_episode({&dc}, grid, ctrl, sc, Rational(10), Rational(1), 0),
                        ConfigError);
        CHECK_NOTHROW(run_episode({&dc}, grid, ctrl, sc, Rational(5), Rational(1), 0));
    }
    SECTION("datacenter missing from the feeder") {
        DeploymentConfig d;
        d.spec = fixtures::tiny_spec_ptr();
        d.initial_batch = 64;
        d.initial_replicas = 1;
        d.phase_share = ThreePhase{1.0, 0.0, 0.0};
        Datacenter other("dc9", Rational(1), 0.0, {d});
        CHECK_THROWS_AS(run_episode({&other}, grid, ctrl, Scenario{}, Rational(1), Rational(1), 0),
                        ConfigError);
    }
    SECTION("duplicate datacenter ids") {
        auto dc2 = one_phase_dc(Rational(1));
        CHECK_THROWS_AS(run_episode({&dc, &dc2}, grid, ctrl, Scenario{}, Rational(1), Rational(1), 0),
                        ConfigError);
    }
    SECTION("overlay targeting an unknown datacenter") {
        Scenario sc;
        sc.overlay = TrainingOverlay{{{0.0, 10.0, 10.0}}, 400.0, "ghost"};
        CHECK_THROWS_AS(run_episode({&dc}, grid, ctrl, sc, Rational(1), Rational(1), 0),
                        ConfigError);
    }
    SECTION("base dt must divide the component dts") {
        Grid g3(feeder, Rational(1, 3));
        CHECK_THROWS_AS(run_episode({&dc}, g3, ctrl, Scenario{}, Rational(1), Rational(1, 2), 0),
                        ConfigError);
    }
}

TEST_CASE("colliding model labels are qualified with the datacenter id") {
    auto feeder = fixtures::three_bus_dc();
    feeder.datacenters.push_back({"dc1", "mid"});
    Grid grid(feeder, Rational(1));
    DeploymentConfig d;
    d.spec = fixtures::tiny_spec_ptr();
    d.initial_batch = 64;
    d.initial_replicas = 1;
    Datacenter a("dc0", Rational(1), 0.0, {d});
    Datacenter b("dc1", Rational(1), 0.0, {d});
    NoCoordinationController ctrl(Rational(1));
    const auto log = run_episode({&a, &b}, grid, ctrl, Scenario{}, Rational(1), Rational(1), 0);
    CHECK(log.model_labels == std::vector<std::string>{"dc0/tiny", "dc1/tiny"});
    CHECK(log.dc_ids == std::vector<std::string>{"dc0", "dc1"});
    CHECK(log.itl_deadlines_s == std::vector<double>{0.5, 0.5});
}

TEST_CASE("episodes are reproducible under a fixed master seed") {
    auto spec = fixtures::tiny_spec();
    spec.itl_noise = ItlNoiseMixture{0.9, 0.0, 0.1, 0.5, 0.4};
    DeploymentConfig d;
    d.spec = std::make_shared<const InferenceModelSpec>(spec);
    d.initial_batch = 64;
    d.initial_replicas = 1;
    d.phase_share = ThreePhase{1.0, 0.0, 0.0};

    auto feeder = one_phase_feeder();
    auto run = [&](std::uint64_t seed) {
        Grid grid(feeder, Rational(1));
        Datacenter dc("dc0", Rational(1), 0.0, {d});
        NoCoordinationController ctrl(Rational(1));
        return run_episode({&dc}, grid, ctrl, Scenario{}, Rational(30), Rational(1), seed);
    };
    const auto l1 = run(11), l2 = run(11), l3 = run(12);
    CHECK(l1.itl_s == l2.itl_s);
    CHECK(l1.voltages_pu == l2.voltages_pu);
    CHECK(l1.itl_s != l3.itl_s);
    CHECK(l1.seed == 11);
}

TEST_CASE("zero duration still produces the initial step everywhere") {
    auto feeder = one_phase_feeder();
    Grid grid(feeder, Rational(1));
    auto dc = one_phase_dc(Rational(1));
    NoCoordinationController ctrl(Rational(1));
    const auto log = run_episode({&dc}, grid, ctrl, Scenario{}, Rational(0), Rational(1), 0);
    CHECK(log.grid_steps() == 1);
    CHECK(log.dc_time_s[0] == std::vector<double>{0.0});
}
