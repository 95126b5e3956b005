#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace openg2g {

struct EventRecord {
    double time_s = 0.0;
    std::string source;  // component or controller id
    std::string kind;    // "command", "warning", ...
    nlohmann::json payload;
};

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void emit(double time_s, const std::string& source, const std::string& kind,
                      nlohmann::json payload) = 0;
};

class EventLog : public EventSink {
public:
    void emit(double time_s, const std::string& source, const std::string& kind,
              nlohmann::json payload) override {
        records.push_back({time_s, source, kind, std::move(payload)});
    }
    std::vector<EventRecord> records;
};

} // namespace openg2g
