#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <variant>

namespace openg2g {

// Typed actuation commands. `target` names the component that must consume
// the command; the loop routes on it and rejects kind/target mismatches.

struct SetBatchSize {
    std::string target;                     // datacenter id
    std::map<std::string, int> batches;     // model label -> batch size
};

struct SetReplicas {
    std::string target;                     // datacenter id
    std::map<std::string, int> replicas;    // model label -> replica count
};

struct SetTaps {
    std::string target = "grid";
    std::map<std::string, double> taps;     // regulator id -> tap ratio
};

using Command = std::variant<SetBatchSize, SetReplicas, SetTaps>;

inline const std::string& command_target(const Command& c) {
    return std::visit([](const auto& v) -> const std::string& { return v.target; }, c);
}

inline const char* command_kind(const Command& c) {
    struct V {
        const char* operator()(const SetBatchSize&) const { return "set_batch_size"; }
        const char* operator()(const SetReplicas&) const { return "set_replicas"; }
        const char* operator()(const SetTaps&) const { return "set_taps"; }
    };
    return std::visit(V{}, c);
}

inline nlohmann::json command_payload(const Command& c) {
    struct V {
        nlohmann::json operator()(const SetBatchSize& x) const {
            return {{"batches", x.batches}};
        }
        nlohmann::json operator()(const SetReplicas& x) const {
            return {{"replicas", x.replicas}};
        }
        nlohmann::json operator()(const SetTaps& x) const {
            return {{"taps", x.taps}};
        }
    };
    nlohmann::json j = std::visit(V{}, c);
    j["kind"] = command_kind(c);
    j["target"] = command_target(c);
    return j;
}

} // namespace openg2g
