#pragma once

#include <algorithm>
#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/rng.hpp"

namespace openg2g {

// Normalized daily shapes for PV generation and time-varying loads,
// piecewise linear over fractional time in [0, 1].
enum class ShapeKind { Flat, Rising, Falling, RisingFalling, MiddayDip };

inline const char* shape_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Flat: return "flat";
        case ShapeKind::Rising: return "rising";
        case ShapeKind::Falling: return "falling";
        case ShapeKind::RisingFalling: return "rising_falling";
        case ShapeKind::MiddayDip: return "midday_dip";
    }
    return "flat";
}

inline ShapeKind shape_from_name(const std::string& s) {
    for (ShapeKind k : {ShapeKind::Flat, ShapeKind::Rising, ShapeKind::Falling,
                        ShapeKind::RisingFalling, ShapeKind::MiddayDip})
        if (s == shape_name(k)) return k;
    throw ConfigError("scenario.bad_shape", "unknown shape: " + s);
}

inline double shape_eval(ShapeKind k, double frac) {
    const double f = std::clamp(frac, 0.0, 1.0);
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    switch (k) {
        case ShapeKind::Flat: return 1.0;
        case ShapeKind::Rising: return lerp(0.1, 1.0, f);
        case ShapeKind::Falling: return lerp(1.0, 0.1, f);
        case ShapeKind::RisingFalling:
            return f < 0.5 ? lerp(0.1, 1.0, 2 * f) : lerp(1.0, 0.1, 2 * f - 1);
        case ShapeKind::MiddayDip:
            return f < 0.5 ? lerp(1.0, 0.25, 2 * f) : lerp(0.25, 1.0, 2 * f - 1);
    }
    return 1.0;
}

struct ShapeProfile {
    ShapeKind shape = ShapeKind::Flat;
    double peak_scale = 1.0;  // multiplier on the attachment's nameplate

    double value(double t, double horizon_s) const {
        return peak_scale * shape_eval(shape, horizon_s > 0 ? t / horizon_s : 0.0);
    }
};

// Linear transition of the replica multiplier from its previous value to
// `amplitude` over [start, start+duration], held afterwards.
struct ReplicaRamp {
    double start_s = 0.0;
    double duration_s = 0.0;
    double amplitude = 1.0;  // multiplier on initial replicas
};

struct OverlayWindow {
    double start_s = 0.0;
    double duration_s = 0.0;
    double gpu_count = 0.0;
};

struct TrainingOverlay {
    std::vector<OverlayWindow> windows;
    double watts_per_gpu = 400.0;
    std::string datacenter;  // empty = the run's first datacenter

    double power_w(double t) const {
        double p = 0.0;
        for (const auto& w : windows)
            if (t >= w.start_s && t < w.start_s + w.duration_s) p += w.gpu_count * watts_per_gpu;
        return p;
    }
};

struct Scenario {
    std::string id = "canonical";
    std::uint64_t seed = 0;
    double horizon_s = 3600.0;
    std::map<std::string, ShapeProfile> pv_profiles;   // feeder profile id -> shape
    std::map<std::string, ShapeProfile> tvl_profiles;  // feeder profile id -> shape
    std::map<std::string, std::vector<ReplicaRamp>> replica_ramps;  // dc id -> ramps
    std::optional<TrainingOverlay> overlay;

    // multiplier applied to a profile-tagged attachment's nameplate
    double pv_value(const std::string& profile, double t) const {
        auto it = pv_profiles.find(profile);
        return it == pv_profiles.end() ? 1.0 : it->second.value(t, horizon_s);
    }
    double tvl_value(const std::string& profile, double t) const {
        auto it = tvl_profiles.find(profile);
        return it == tvl_profiles.end() ? 1.0 : it->second.value(t, horizon_s);
    }

    double ramp_multiplier(const std::string& dc, double t) const {
        auto it = replica_ramps.find(dc);
        if (it == replica_ramps.end()) return 1.0;
        double m = 1.0;
        for (const auto& r : it->second) {
            if (t < r.start_s) break;
            if (r.duration_s <= 0 || t >= r.start_s + r.duration_s) {
                m = r.amplitude;
                continue;
            }
            m += (r.amplitude - m) * (t - r.start_s) / r.duration_s;
            break;
        }
        return m;
    }

    double overlay_power_w(const std::string& dc, const std::string& first_dc, double t) const {
        if (!overlay) return 0.0;
        const std::string& target = overlay->datacenter.empty() ? first_dc : overlay->datacenter;
        return target == dc ? overlay->power_w(t) : 0.0;
    }
};

inline void to_json(nlohmann::json& j, const ShapeProfile& p) {
    j = {{"shape", shape_name(p.shape)}, {"peak_scale", p.peak_scale}};
}
inline void from_json(const nlohmann::json& j, ShapeProfile& p) {
    p.shape = shape_from_name(j.at("shape").get<std::string>());
    j.at("peak_scale").get_to(p.peak_scale);
}
inline void to_json(nlohmann::json& j, const ReplicaRamp& r) {
    j = {{"start_s", r.start_s}, {"duration_s", r.duration_s}, {"amplitude", r.amplitude}};
}
inline void from_json(const nlohmann::json& j, ReplicaRamp& r) {
    j.at("start_s").get_to(r.start_s);
    j.at("duration_s").get_to(r.duration_s);
    j.at("amplitude").get_to(r.amplitude);
}
inline void to_json(nlohmann::json& j, const OverlayWindow& w) {
    j = {{"start_s", w.start_s}, {"duration_s", w.duration_s}, {"gpu_count", w.gpu_count}};
}
inline void from_json(const nlohmann::json& j, OverlayWindow& w) {
    j.at("start_s").get_to(w.start_s);
    j.at("duration_s").get_to(w.duration_s);
    j.at("gpu_count").get_to(w.gpu_count);
}
inline void to_json(nlohmann::json& j, const TrainingOverlay& o) {
    j = {{"windows", o.windows}, {"watts_per_gpu", o.watts_per_gpu}};
    if (!o.datacenter.empty()) j["datacenter"] = o.datacenter;
}
inline void from_json(const nlohmann::json& j, TrainingOverlay& o) {
    j.at("windows").get_to(o.windows);
    j.at("watts_per_gpu").get_to(o.watts_per_gpu);
    o.datacenter = j.value("datacenter", "");
}
inline void to_json(nlohmann::json& j, const Scenario& s) {
    j = {{"id", s.id},
         {"seed", s.seed},
         {"horizon_s", s.horizon_s},
         {"pv_profiles", s.pv_profiles},
         {"tvl_profiles", s.tvl_profiles},
         {"replica_ramps", s.replica_ramps}};
    if (s.overlay) j["training_overlay"] = *s.overlay;
}
inline void from_json(const nlohmann::json& j, Scenario& s) {
    j.at("id").get_to(s.id);
    j.at("seed").get_to(s.seed);
    j.at("horizon_s").get_to(s.horizon_s);
    j.at("pv_profiles").get_to(s.pv_profiles);
    j.at("tvl_profiles").get_to(s.tvl_profiles);
    j.at("replica_ramps").get_to(s.replica_ramps);
    if (j.contains("training_overlay"))
        s.overlay = j.at("training_overlay").get<TrainingOverlay>();
}

struct Range {
    double lo = 0.0, hi = 0.0;
};
inline void to_json(nlohmann::json& j, const Range& r) { j = {r.lo, r.hi}; }
inline void from_json(const nlohmann::json& j, Range& r) {
    r.lo = j.at(0).get<double>();
    r.hi = j.at(1).get<double>();
}

// Sampling ranges live in config, not code: this struct is the config, and
// a resolved copy is embedded in every library file.
struct SamplingConfig {
    double horizon_s = 3600.0;
    Range pv_peak_scale{0.2, 2.0};
    Range tvl_peak_scale{0.6, 2.6};
    double overlay_probability = 0.69;
    Range overlay_gpus{1200.0, 3600.0};
    double overlay_watts_per_gpu = 400.0;
    Range overlay_start_s{0.0, 2000.0};
    Range overlay_duration_s{400.0, 1400.0};
    int ramp_count_min = 1;
    int ramp_count_max = 2;
    Range ramp_start_s{0.0, 2800.0};
    Range ramp_duration_s{200.0, 900.0};
    Range ramp_amplitude{0.55, 1.45};
};

inline void to_json(nlohmann::json& j, const SamplingConfig& c) {
    j = {{"horizon_s", c.horizon_s},
         {"pv_peak_scale", c.pv_peak_scale},
         {"tvl_peak_scale", c.tvl_peak_scale},
         {"overlay_probability", c.overlay_probability},
         {"overlay_gpus", c.overlay_gpus},
         {"overlay_watts_per_gpu", c.overlay_watts_per_gpu},
         {"overlay_start_s", c.overlay_start_s},
         {"overlay_duration_s", c.overlay_duration_s},
         {"ramp_count_min", c.ramp_count_min},
         {"ramp_count_max", c.ramp_count_max},
         {"ramp_start_s", c.ramp_start_s},
         {"ramp_duration_s", c.ramp_duration_s},
         {"ramp_amplitude", c.ramp_amplitude}};
}
inline void from_json(const nlohmann::json& j, SamplingConfig& c) {
    SamplingConfig d;
    c.horizon_s = j.value("horizon_s", d.horizon_s);
    c.pv_peak_scale = j.value("pv_peak_scale", d.pv_peak_scale);
    c.tvl_peak_scale = j.value("tvl_peak_scale", d.tvl_peak_scale);
    c.overlay_probability = j.value("overlay_probability", d.overlay_probability);
    c.overlay_gpus = j.value("overlay_gpus", d.overlay_gpus);
    c.overlay_watts_per_gpu = j.value("overlay_watts_per_gpu", d.overlay_watts_per_gpu);
    c.overlay_start_s = j.value("overlay_start_s", d.overlay_start_s);
    c.overlay_duration_s = j.value("overlay_duration_s", d.overlay_duration_s);
    c.ramp_count_min = j.value("ramp_count_min", d.ramp_count_min);
    c.ramp_count_max = j.value("ramp_count_max", d.ramp_count_max);
    c.ramp_start_s = j.value("ramp_start_s", d.ramp_start_s);
    c.ramp_duration_s = j.value("ramp_duration_s", d.ramp_duration_s);
    c.ramp_amplitude = j.value("ramp_amplitude", d.ramp_amplitude);
}

// Fixed benchmark disturbance: a 0.96 MW training burst mid-episode and a
// ramp of every datacenter to half its replicas late in the episode.
inline Scenario canonical_scenario(const std::vector<std::string>& pv_profile_ids,
                                   const std::vector<std::string>& tvl_profile_ids,
                                   const std::vector<std::string>& dc_ids,
                                   double horizon_s = 3600.0) {
    Scenario s;
    s.id = "canonical";
    s.seed = 0;
    s.horizon_s = horizon_s;
    for (const auto& id : pv_profile_ids)
        s.pv_profiles[id] = {ShapeKind::RisingFalling, 1.0};
    for (const auto& id : tvl_profile_ids)
        s.tvl_profiles[id] = {ShapeKind::Flat, 1.0};
    TrainingOverlay ov;
    ov.windows.push_back({1000.0, 1000.0, 2400.0});
    ov.watts_per_gpu = 400.0;
    s.overlay = ov;
    for (const auto& dc : dc_ids) s.replica_ramps[dc] = {{2500.0, 500.0, 0.5}};
    return s;
}

inline double sample_uniform(std::mt19937_64& g, const Range& r) {
    return std::uniform_real_distribution<double>(r.lo, r.hi)(g);
}

// Deterministic draw: a fixed draw order over sorted ids makes the scenario
// a pure function of (seed, config, id lists).
inline Scenario sample_scenario(std::uint64_t seed, const SamplingConfig& cfg,
                                std::vector<std::string> pv_profile_ids,
                                std::vector<std::string> tvl_profile_ids,
                                std::vector<std::string> dc_ids) {
    std::sort(pv_profile_ids.begin(), pv_profile_ids.end());
    std::sort(tvl_profile_ids.begin(), tvl_profile_ids.end());
    std::sort(dc_ids.begin(), dc_ids.end());

    Scenario s;
    s.id = "seed-" + std::to_string(seed);
    s.seed = seed;
    s.horizon_s = cfg.horizon_s;

    auto pick_shape = [](std::mt19937_64& g) {
        static constexpr ShapeKind kinds[] = {ShapeKind::Flat, ShapeKind::Rising,
                                              ShapeKind::Falling, ShapeKind::RisingFalling,
                                              ShapeKind::MiddayDip};
        return kinds[std::uniform_int_distribution<int>(0, 4)(g)];
    };

    {
        auto g = derive_stream(seed, "scenario", "pv");
        for (const auto& id : pv_profile_ids)
            s.pv_profiles[id] = {pick_shape(g), sample_uniform(g, cfg.pv_peak_scale)};
    }
    {
        auto g = derive_stream(seed, "scenario", "tvl");
        for (const auto& id : tvl_profile_ids)
            s.tvl_profiles[id] = {pick_shape(g), sample_uniform(g, cfg.tvl_peak_scale)};
    }
    {
        auto g = derive_stream(seed, "scenario", "overlay");
        if (std::uniform_real_distribution<double>(0.0, 1.0)(g) < cfg.overlay_probability) {
            TrainingOverlay ov;
            ov.watts_per_gpu = cfg.overlay_watts_per_gpu;
            OverlayWindow w;
            w.gpu_count = std::floor(sample_uniform(g, cfg.overlay_gpus));
            w.start_s = sample_uniform(g, cfg.overlay_start_s);
            w.duration_s = sample_uniform(g, cfg.overlay_duration_s);
            w.duration_s = std::min(w.duration_s, cfg.horizon_s - w.start_s);
            ov.windows.push_back(w);
            s.overlay = ov;
        }
    }
    {
        auto g = derive_stream(seed, "scenario", "ramps");
        for (const auto& dc : dc_ids) {
            const int n =
                std::uniform_int_distribution<int>(cfg.ramp_count_min, cfg.ramp_count_max)(g);
            std::vector<ReplicaRamp> ramps;
            for (int i = 0; i < n; ++i) {
                ReplicaRamp r;
                r.start_s = sample_uniform(g, cfg.ramp_start_s);
                r.duration_s = sample_uniform(g, cfg.ramp_duration_s);
                r.amplitude = sample_uniform(g, cfg.ramp_amplitude);
                ramps.push_back(r);
            }
            std::sort(ramps.begin(), ramps.end(),
                      [](const ReplicaRamp& a, const ReplicaRamp& b) { return a.start_s < b.start_s; });
            s.replica_ramps[dc] = std::move(ramps);
        }
    }
    return s;
}

} // namespace openg2g
