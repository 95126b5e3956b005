#pragma once

#include <cmath>
#include <json.hpp>

#include "openg2g/common.hpp"

namespace openg2g {

// Four-parameter logistic in x = log2(batch size). Fits of this shape carry
// the per-replica power (W), throughput (tokens/s) and inter-token latency
// (s) curves of an inference server.
struct LogisticFit {
    double floor = 0.0;     // lower asymptote
    double span = 0.0;      // distance between asymptotes (>= 0)
    double slope = 1.0;     // logistic growth rate k
    double midpoint = 0.0;  // x0, location of the inflection

    double operator()(double x) const {
        return floor + span / (1.0 + std::exp(-slope * (x - midpoint)));
    }

    // d/dx of operator(). Written via the stable sigmoid product form.
    double derivative(double x) const {
        const double s = 1.0 / (1.0 + std::exp(-slope * (x - midpoint)));
        return span * slope * s * (1.0 - s);
    }
};

inline void to_json(nlohmann::json& j, const LogisticFit& f) {
    j = nlohmann::json{{"floor", f.floor}, {"span", f.span},
                       {"slope", f.slope}, {"midpoint", f.midpoint}};
}

inline void from_json(const nlohmann::json& j, LogisticFit& f) {
    j.at("floor").get_to(f.floor);
    j.at("span").get_to(f.span);
    j.at("slope").get_to(f.slope);
    j.at("midpoint").get_to(f.midpoint);
}

inline double log2_batch(int batch) {
    if (batch <= 0) throw ConfigError("fit.bad_batch", "batch size must be positive");
    return std::log2(static_cast<double>(batch));
}

} // namespace openg2g
