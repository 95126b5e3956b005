#pragma once

#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "openg2g/command.hpp"
#include "openg2g/common.hpp"
#include "openg2g/model_spec.hpp"
#include "openg2g/rng.hpp"
#include "openg2g/scenario.hpp"
#include "openg2g/trace.hpp"

namespace openg2g {

struct DeploymentConfig {
    std::shared_ptr<const InferenceModelSpec> spec;
    int initial_batch = 128;
    int initial_replicas = 1;
    ThreePhase phase_share{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

struct DatacenterState {
    double time_s = 0.0;
    // deployment order; labels via Datacenter::labels()
    std::vector<int> batch;
    std::vector<int> replicas;
    std::vector<double> itl_s;
    std::vector<double> throughput_tps;   // datacenter-level tokens/s
    std::vector<double> model_power_w;    // per deployment, summed over phases
    ThreePhase power_w;                   // total incl. base load and overlay
};

// Batch-size-controllable inference datacenter: per-model logistic curves
// (or replayed traces) scaled by active replicas, plus a constant base load
// and any scenario training overlay, split onto phases by configured shares.
class Datacenter {
public:
    Datacenter(std::string id, Rational dt, double base_load_w,
               std::vector<DeploymentConfig> deployments, const TraceStore* traces = nullptr)
        : id_(std::move(id)), dt_(dt), base_load_w_(base_load_w), traces_(traces) {
        if (dt_ <= Rational(0)) throw ConfigError("datacenter.bad_dt", "dt must be positive");
        if (base_load_w_ < 0)
            throw ConfigError("datacenter.bad_base_load", "base load must be nonnegative");
        if (deployments.empty())
            throw ConfigError("datacenter.no_deployments", id_ + ": needs at least one model");
        for (auto& d : deployments) {
            if (!d.spec) throw ConfigError("datacenter.bad_spec", "null model spec");
            validate(*d.spec);
            if (!d.spec->is_on_ladder(d.initial_batch))
                throw ConfigError("datacenter.off_ladder",
                                  d.spec->label + ": initial batch " +
                                      std::to_string(d.initial_batch) + " not on ladder");
            if (d.initial_replicas <= 0)
                throw ConfigError("datacenter.bad_replicas",
                                  d.spec->label + ": initial replicas must be positive");
            const double share_sum = d.phase_share.total();
            if (d.phase_share.a < 0 || d.phase_share.b < 0 || d.phase_share.c < 0 ||
                std::abs(share_sum - 1.0) > 1e-9)
                throw ConfigError("datacenter.bad_phase_share",
                                  d.spec->label + ": phase shares must be nonnegative and sum to 1");
            labels_.push_back(d.spec->label);
            const int b0 = d.initial_batch;
            models_.push_back({std::move(d), b0, std::nullopt, {}});
        }
        reset(nullptr, 0);
    }

    const std::string& id() const { return id_; }
    const Rational& dt() const { return dt_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const InferenceModelSpec& spec(std::size_t i) const { return *models_[i].cfg.spec; }
    std::size_t model_count() const { return models_.size(); }
    double base_load_w() const { return base_load_w_; }

    void reset(const Scenario* scenario, std::uint64_t master_seed, bool overlay_target = true) {
        scenario_ = scenario;
        overlay_target_ = overlay_target;
        for (auto& m : models_) {
            m.batch = m.cfg.initial_batch;
            m.replica_override.reset();
            if (m.cfg.spec->itl_noise)
                m.noise_rng = derive_stream(master_seed, id_, "itl_noise:" + m.cfg.spec->label);
        }
        pending_.clear();
        has_state_ = false;
        state_ = DatacenterState{};
    }

    void queue_command(const Command& c) {
        if (std::holds_alternative<SetTaps>(c))
            throw RoutingError("datacenter.bad_command",
                               id_ + " cannot accept " + command_kind(c));
        pending_.push_back(c);
    }

    int active_replicas(std::size_t i, double t) const {
        const auto& m = models_[i];
        if (m.replica_override) return *m.replica_override;
        const double mult = scenario_ ? scenario_->ramp_multiplier(id_, t) : 1.0;
        return std::max(0, static_cast<int>(std::llround(m.cfg.initial_replicas * mult)));
    }

    const DatacenterState& step(double t) {
        apply_pending_commands();
        DatacenterState s;
        s.time_s = t;
        ThreePhase total{};
        for (std::size_t i = 0; i < models_.size(); ++i) {
            auto& m = models_[i];
            const auto& spec = *m.cfg.spec;
            const int r = active_replicas(i, t);
            const double x = log2_batch(m.batch);
            double per_replica_w;
            if (traces_ && traces_->has_trace(spec.label, m.batch))
                per_replica_w = traces_->power_w(spec.label, m.batch, t);
            else
                per_replica_w = spec.power_fit(x);
            const double p_model = per_replica_w * r;
            double itl = spec.itl_fit(x);
            if (spec.itl_noise) itl *= draw_noise(m, *spec.itl_noise);
            s.batch.push_back(m.batch);
            s.replicas.push_back(r);
            s.itl_s.push_back(itl);
            s.throughput_tps.push_back(spec.throughput_fit(x) * r);
            s.model_power_w.push_back(p_model);
            total += m.cfg.phase_share * p_model;
        }
        double overhead = base_load_w_;
        // whether this dc hosts the scenario's overlay is decided at reset()
        if (scenario_ && overlay_target_ && scenario_->overlay)
            overhead += scenario_->overlay->power_w(t);
        total += ThreePhase{overhead / 3.0, overhead / 3.0, overhead / 3.0};
        s.power_w = total;
        state_ = std::move(s);
        has_state_ = true;
        return state_;
    }

    const DatacenterState& state() const {
        if (!has_state_) throw ConfigError("datacenter.no_state", id_ + " has not stepped yet");
        return state_;
    }
    bool has_state() const { return has_state_; }

private:
    struct ModelRuntime {
        DeploymentConfig cfg;
        int batch = 0;
        std::optional<int> replica_override;
        std::mt19937_64 noise_rng;
    };

    void apply_pending_commands() {
        for (const auto& c : pending_) {
            if (const auto* sb = std::get_if<SetBatchSize>(&c)) {
                for (const auto& [label, batch] : sb->batches) {
                    auto& m = find_model(label);
                    if (!m.cfg.spec->is_on_ladder(batch))
                        throw ConfigError("datacenter.off_ladder",
                                          label + ": batch " + std::to_string(batch) +
                                              " not on ladder");
                    m.batch = batch;
                }
            } else if (const auto* sr = std::get_if<SetReplicas>(&c)) {
                for (const auto& [label, count] : sr->replicas) {
                    if (count < 0)
                        throw ConfigError("datacenter.bad_replicas",
                                          label + ": negative replica count");
                    find_model(label).replica_override = count;
                }
            }
        }
        pending_.clear();
    }

    ModelRuntime& find_model(const std::string& label) {
        for (auto& m : models_)
            if (m.cfg.spec->label == label) return m;
        throw ConfigError("datacenter.unknown_model", id_ + ": unknown model " + label);
    }

    double draw_noise(ModelRuntime& m, const ItlNoiseMixture& n) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const bool first = u(m.noise_rng) < n.weight1;
        std::lognormal_distribution<double> d(first ? n.mu1 : n.mu2, first ? n.sigma1 : n.sigma2);
        return d(m.noise_rng);
    }

    std::string id_;
    Rational dt_;
    double base_load_w_;
    const TraceStore* traces_;
    std::vector<std::string> labels_;
    std::vector<ModelRuntime> models_;
    const Scenario* scenario_ = nullptr;
    bool overlay_target_ = true;
    std::deque<Command> pending_;
    DatacenterState state_;
    bool has_state_ = false;
};

} // namespace openg2g
