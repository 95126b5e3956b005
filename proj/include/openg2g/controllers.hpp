#pragma once

#include <json.hpp>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "openg2g/controller.hpp"

namespace openg2g {

// ---------------------------------------------------------------- none ----

class NoCoordinationController : public Controller {
public:
    explicit NoCoordinationController(Rational dt) : dt_(dt), name_("none") {}
    const std::string& name() const override { return name_; }
    const Rational& dt() const override { return dt_; }
    void reset() override {}
    std::vector<Command> step(const StepContext&) override { return {}; }

private:
    Rational dt_;
    std::string name_;
};

// --------------------------------------------------------------- droop ----

struct DroopParams {
    double gain_kp = 50.0;
    double deadband = 0.002;
    double v_lo = 0.95;
    double v_hi = 1.05;
    double dt_s = 1.0;
};

inline void from_json(const nlohmann::json& j, DroopParams& p) {
    DroopParams d;
    p.gain_kp = j.value("gain_kp", d.gain_kp);
    p.deadband = j.value("deadband", d.deadband);
    p.v_lo = j.value("v_lo", d.v_lo);
    p.v_hi = j.value("v_hi", d.v_hi);
    p.dt_s = j.value("dt_s", d.dt_s);
}

// Proportional batch response to the worst band violation, shared pressure
// signal across models, with a latency guard that blocks batch increases for
// any model currently past its ITL deadline.
class DroopController : public Controller {
public:
    DroopController(DroopParams params, ControllerEnv env)
        : params_(params), env_(std::move(env)), dt_(rational_seconds(params.dt_s)), name_("droop") {}

    const std::string& name() const override { return name_; }
    const Rational& dt() const override { return dt_; }

    void reset() override { per_dc_.clear(); }

    std::vector<Command> step(const StepContext& ctx) override {
        ensure_init(ctx);
        const double vmin = ctx.grid_state.min_pu();
        const double vmax = ctx.grid_state.max_pu();
        const double eps_lo = std::max(0.0, params_.v_lo - vmin);
        const double eps_hi = std::max(0.0, vmax - params_.v_hi);
        double p = eps_lo - eps_hi;
        if (std::abs(p) <= params_.deadband) p = 0.0;

        std::vector<Command> out;
        for (std::size_t d = 0; d < env_.dcs.size(); ++d) {
            if (p == 0.0) continue;
            const auto& info = env_.dcs[d];
            const auto& dc = *ctx.dc_states[d];
            SetBatchSize cmd;
            cmd.target = info.id;
            for (std::size_t i = 0; i < info.specs.size(); ++i) {
                auto& st = per_dc_[d][i];
                const double x_new = st.project(st.x - params_.gain_kp * p);
                const int b_new = snap_to_ladder(x_new, info.specs[i]->feasible_batch_sizes);
                const int b_cur = dc.batch[i];
                // latency guard: no increases while this model is over deadline
                if (b_new > b_cur && dc.itl_s[i] > info.specs[i]->itl_deadline_s) continue;
                st.x = x_new;
                if (b_new != b_cur) cmd.batches[info.specs[i]->label] = b_new;
            }
            if (!cmd.batches.empty()) out.emplace_back(std::move(cmd));
        }
        return out;
    }

private:
    void ensure_init(const StepContext& ctx) {
        if (!per_dc_.empty()) return;
        for (std::size_t d = 0; d < env_.dcs.size(); ++d) {
            std::vector<LogBatchState> states;
            for (std::size_t i = 0; i < env_.dcs[d].specs.size(); ++i)
                states.push_back(
                    LogBatchState::init(*env_.dcs[d].specs[i], ctx.dc_states[d]->batch[i]));
            per_dc_.push_back(std::move(states));
        }
    }

    DroopParams params_;
    ControllerEnv env_;
    Rational dt_;
    std::string name_;
    std::vector<std::vector<LogBatchState>> per_dc_;
};

// ----------------------------------------------------------------- ofo ----

struct OfoParams {
    double alpha_t = 1e-4;   // throughput drift weight
    double beta_s = 1.0;     // switching regularizer
    double k_v = 1e6;        // voltage constraint weight
    double rho_x = 0.05;     // primal step
    double rho_v = 1.0;      // voltage dual step
    double rho_l = 1.0;      // latency dual step
    double tau_h_s = 300.0;  // sensitivity refresh period
    double delta_p_w = 1e5;  // probe size
    double v_lo = 0.95;
    double v_hi = 1.05;
    double dt_s = 1.0;
    double fit_perturbation = 0.0;  // scales the controller's fit-copy spans
    SensitivityScheme scheme = SensitivityScheme::Central;
};

inline void from_json(const nlohmann::json& j, OfoParams& p) {
    OfoParams d;
    p.alpha_t = j.value("alpha_t", d.alpha_t);
    p.beta_s = j.value("beta_s", d.beta_s);
    p.k_v = j.value("k_v", d.k_v);
    p.rho_x = j.value("rho_x", d.rho_x);
    p.rho_v = j.value("rho_v", d.rho_v);
    p.rho_l = j.value("rho_l", d.rho_l);
    p.tau_h_s = j.value("tau_h_s", d.tau_h_s);
    p.delta_p_w = j.value("delta_p_w", d.delta_p_w);
    p.v_lo = j.value("v_lo", d.v_lo);
    p.v_hi = j.value("v_hi", d.v_hi);
    p.dt_s = j.value("dt_s", d.dt_s);
    p.fit_perturbation = j.value("fit_perturbation", d.fit_perturbation);
    p.scheme = j.value("forward_difference", false) ? SensitivityScheme::Forward
                                                    : SensitivityScheme::Central;
}

// Inputs of the per-model Lagrangian around one control step. `eta` is the
// stacked upper-minus-lower voltage dual, `mu` the latency dual, both from
// before this step's dual update; fits are per replica, scaled by the
// currently active replica count.
struct OfoModelInputs {
    LogisticFit power_fit;
    LogisticFit throughput_fit;
    LogisticFit itl_fit;
    ThreePhase phase_share{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    int replicas = 1;
    double mu = 0.0;
    std::vector<double> eta;
    const SensitivityMatrix* h = nullptr;
    double x_prev = 0.0;
};

namespace detail {

// eta' H e_i: projects the stacked voltage dual through the sensitivity onto
// this model's phase split.
inline double eta_h_share(const OfoModelInputs& in) {
    if (!in.h) return 0.0;
    double acc = 0.0;
    const std::size_t n = std::min(in.eta.size(), in.h->rows.size());
    for (std::size_t k = 0; k < n; ++k) {
        const auto& row = in.h->rows[k];
        acc += in.eta[k] *
               (row[0] * in.phase_share.a + row[1] * in.phase_share.b + row[2] * in.phase_share.c);
    }
    return acc;
}

} // namespace detail

inline double ofo_lagrangian(const OfoModelInputs& in, const OfoParams& p, double x) {
    const double r = in.replicas;
    return -p.alpha_t * in.throughput_fit(x) * r +
           p.k_v * detail::eta_h_share(in) * in.power_fit(x) * r +
           in.mu * in.itl_fit(x) +
           p.beta_s * (x - in.x_prev) * (x - in.x_prev);
}

inline double ofo_primal_gradient(const OfoModelInputs& in, const OfoParams& p, double x) {
    const double r = in.replicas;
    return -p.alpha_t * in.throughput_fit.derivative(x) * r +
           p.k_v * detail::eta_h_share(in) * in.power_fit.derivative(x) * r +
           in.mu * in.itl_fit.derivative(x) +
           2.0 * p.beta_s * (x - in.x_prev);
}

// Online feedback optimization: projected primal-dual steps on measured
// voltages and latencies, voltage coupling through a periodically re-probed
// grid sensitivity.
class OfoController : public Controller {
public:
    OfoController(OfoParams params, ControllerEnv env)
        : params_(params), env_(std::move(env)), dt_(rational_seconds(params.dt_s)), name_("ofo") {
        if (!env_.grid) throw ConfigError("controller.no_grid", "ofo needs a grid handle");
    }

    const std::string& name() const override { return name_; }
    const Rational& dt() const override { return dt_; }

    void reset() override { per_dc_.clear(); }

    std::vector<Command> step(const StepContext& ctx) override {
        ensure_init(ctx);
        const double t = ctx.clock.time_s();
        const auto& v = ctx.grid_state.voltages_pu;

        std::vector<Command> out;
        for (std::size_t d = 0; d < env_.dcs.size(); ++d) {
            auto& st = per_dc_[d];
            const auto& info = env_.dcs[d];
            const auto& dc = *ctx.dc_states[d];

            maybe_refresh_sensitivity(st, info.id, t, ctx.events);

            // gradient consumes the duals from before this step's update
            std::vector<double> eta(v.size());
            for (std::size_t k = 0; k < v.size(); ++k) eta[k] = st.lambda_hi[k] - st.lambda_lo[k];
            const std::vector<double> mu_old = st.mu;

            for (std::size_t k = 0; k < v.size(); ++k) {
                st.lambda_lo[k] = std::max(0.0, st.lambda_lo[k] + params_.rho_v * (params_.v_lo - v[k]));
                st.lambda_hi[k] = std::max(0.0, st.lambda_hi[k] + params_.rho_v * (v[k] - params_.v_hi));
            }
            for (std::size_t i = 0; i < info.specs.size(); ++i)
                st.mu[i] = std::max(0.0, st.mu[i] + params_.rho_l * (dc.itl_s[i] -
                                                                    info.specs[i]->itl_deadline_s));

            SetBatchSize cmd;
            cmd.target = info.id;
            for (std::size_t i = 0; i < info.specs.size(); ++i) {
                auto& xs = st.batch[i];
                OfoModelInputs in;
                in.power_fit = st.fits[i].power;
                in.throughput_fit = st.fits[i].throughput;
                in.itl_fit = st.fits[i].itl;
                in.phase_share = st.shares[i];
                in.replicas = dc.replicas[i];
                in.mu = mu_old[i];
                in.eta = eta;
                in.h = &st.h;
                in.x_prev = xs.x_prev;
                const double g = ofo_primal_gradient(in, params_, xs.x);
                const double x_next = xs.project(xs.x - params_.rho_x * g);
                xs.x_prev = xs.x;
                xs.x = x_next;
                const int b = snap_to_ladder(x_next, info.specs[i]->feasible_batch_sizes);
                if (b != dc.batch[i]) cmd.batches[info.specs[i]->label] = b;
            }
            if (!cmd.batches.empty()) out.emplace_back(std::move(cmd));
        }
        return out;
    }

private:
    struct FitCopies {
        LogisticFit power, throughput, itl;
    };
    struct PerDc {
        std::vector<double> lambda_lo, lambda_hi;
        std::vector<double> mu;
        std::vector<LogBatchState> batch;
        std::vector<FitCopies> fits;
        std::vector<ThreePhase> shares;
        SensitivityMatrix h;
        double last_refresh_s = -std::numeric_limits<double>::infinity();
    };

    void ensure_init(const StepContext& ctx) {
        if (!per_dc_.empty()) return;
        const std::size_t nv = ctx.grid_state.voltages_pu.size();
        for (std::size_t d = 0; d < env_.dcs.size(); ++d) {
            PerDc st;
            st.lambda_lo.assign(nv, 0.0);
            st.lambda_hi.assign(nv, 0.0);
            st.mu.assign(env_.dcs[d].specs.size(), 0.0);
            st.h.rows.assign(nv, {0.0, 0.0, 0.0});
            for (std::size_t i = 0; i < env_.dcs[d].specs.size(); ++i) {
                const auto& spec = *env_.dcs[d].specs[i];
                st.batch.push_back(LogBatchState::init(spec, ctx.dc_states[d]->batch[i]));
                FitCopies fc{spec.power_fit, spec.throughput_fit, spec.itl_fit};
                if (params_.fit_perturbation != 0.0) {
                    const double s = 1.0 + params_.fit_perturbation;
                    fc.power.span *= s;
                    fc.throughput.span *= s;
                    fc.itl.span *= s;
                }
                st.fits.push_back(fc);
                st.shares.push_back(i < env_.dcs[d].phase_shares.size()
                                        ? env_.dcs[d].phase_shares[i]
                                        : ThreePhase{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
            }
            per_dc_.push_back(std::move(st));
        }
    }

    void maybe_refresh_sensitivity(PerDc& st, const std::string& dc_id, double t,
                                   EventSink* events) {
        if (t - st.last_refresh_s < params_.tau_h_s) return;
        try {
            st.h = env_.grid->estimate_sensitivity(dc_id, params_.delta_p_w, params_.scheme);
            if (events)
                events->emit(t, "ofo", "sensitivity_refresh", {{"datacenter", dc_id}});
        } catch (const DivergenceError& e) {
            // keep the previous H; a probe that diverges must not kill the run
            if (events)
                events->emit(t, "ofo", "warning",
                             {{"what", "sensitivity_probe_failed"},
                              {"datacenter", dc_id},
                              {"detail", e.what()}});
        }
        st.last_refresh_s = t;
    }

    OfoParams params_;
    ControllerEnv env_;
    Rational dt_;
    std::string name_;
    std::vector<PerDc> per_dc_;
};

// -------------------------------------------------------- adaptive tap ----

struct AdaptiveTapParams {
    std::string regulator;  // empty = the feeder's first regulator
    double tap_step = 0.00625;
    double tap_min = 0.90;
    double tap_max = 1.10;
    double deadband = 0.002;
    double cooldown_s = 60.0;
    double v_lo = 0.95;
    double v_hi = 1.05;
    double dt_s = 5.0;
};

inline void from_json(const nlohmann::json& j, AdaptiveTapParams& p) {
    AdaptiveTapParams d;
    p.regulator = j.value("regulator", d.regulator);
    p.tap_step = j.value("tap_step", d.tap_step);
    p.tap_min = j.value("tap_min", d.tap_min);
    p.tap_max = j.value("tap_max", d.tap_max);
    p.deadband = j.value("deadband", d.deadband);
    p.cooldown_s = j.value("cooldown_s", d.cooldown_s);
    p.v_lo = j.value("v_lo", d.v_lo);
    p.v_hi = j.value("v_hi", d.v_hi);
    p.dt_s = j.value("dt_s", d.dt_s);
}

// Single-regulator rule: one tap step toward the larger band margin, with a
// deadband and a cooldown that only arms after an actual move.
class AdaptiveTapController : public Controller {
public:
    AdaptiveTapController(AdaptiveTapParams params, ControllerEnv env)
        : params_(params), env_(std::move(env)), dt_(rational_seconds(params.dt_s)),
          name_("adaptive_tap") {
        if (!env_.grid) throw ConfigError("controller.no_grid", "adaptive_tap needs a grid handle");
        const auto& regs = env_.grid->feeder().regulators;
        if (regs.empty())
            throw ConfigError("controller.no_regulator", "feeder has no regulators");
        if (params_.regulator.empty()) params_.regulator = regs.front().id;
        reg_index_ = -1;
        for (std::size_t i = 0; i < regs.size(); ++i)
            if (regs[i].id == params_.regulator) reg_index_ = static_cast<int>(i);
        if (reg_index_ < 0)
            throw ConfigError("controller.no_regulator",
                              "unknown regulator: " + params_.regulator);
    }

    const std::string& name() const override { return name_; }
    const Rational& dt() const override { return dt_; }

    void reset() override { next_allowed_s_ = 0.0; }

    std::vector<Command> step(const StepContext& ctx) override {
        const double t = ctx.clock.time_s();
        if (t < next_allowed_s_) return {};
        const double low_margin = params_.v_lo - ctx.grid_state.min_pu();
        const double high_margin = ctx.grid_state.max_pu() - params_.v_hi;
        if (std::max(low_margin, high_margin) <= params_.deadband) return {};
        const int direction = low_margin >= high_margin ? 1 : -1;
        const double cur = ctx.grid_state.taps[reg_index_];
        const double target =
            std::clamp(cur + direction * params_.tap_step, params_.tap_min, params_.tap_max);
        if (std::abs(target - cur) < 1e-12) return {};  // pinned at a range end
        next_allowed_s_ = t + params_.cooldown_s;
        SetTaps cmd;
        cmd.taps[params_.regulator] = target;
        return {cmd};
    }

private:
    AdaptiveTapParams params_;
    ControllerEnv env_;
    Rational dt_;
    std::string name_;
    int reg_index_ = -1;
    double next_allowed_s_ = 0.0;
};

// ------------------------------------------------------------- factory ----

inline std::unique_ptr<Controller> make_controller(const std::string& name,
                                                   nlohmann::json params, ControllerEnv env) {
    if (params.is_null()) params = nlohmann::json::object();
    if (!params.is_object())
        throw ConfigError("controller.bad_params", "controller params must be a JSON object");
    if (name == "none") {
        const double dt = params.value("dt_s", 1.0);
        return std::make_unique<NoCoordinationController>(rational_seconds(dt));
    }
    if (name == "droop")
        return std::make_unique<DroopController>(params.get<DroopParams>(), std::move(env));
    if (name == "ofo")
        return std::make_unique<OfoController>(params.get<OfoParams>(), std::move(env));
    if (name == "adaptive_tap")
        return std::make_unique<AdaptiveTapController>(params.get<AdaptiveTapParams>(),
                                                       std::move(env));
    throw ConfigError("controller.unknown",
                      "unknown controller \"" + name +
                          "\" (valid: none, droop, ofo, adaptive_tap)");
}

} // namespace openg2g
