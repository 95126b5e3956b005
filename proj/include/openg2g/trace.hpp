#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "openg2g/common.hpp"
#include "openg2g/logistic.hpp"

namespace openg2g {

// Replayable measured power traces, keyed by (model label, batch size).
// On disk: one directory per model containing trace.csv with rows
// `batch_size,relative_time_s,power_w`, plus an optional itl_fit.json.
class TraceStore {
public:
    struct Sample {
        double t = 0.0;
        double power_w = 0.0;
    };

    void add_trace(const std::string& label, int batch, std::vector<Sample> rows) {
        if (rows.empty())
            throw ConfigError("trace.empty",
                              label + "/" + std::to_string(batch) + ": empty trace");
        std::sort(rows.begin(), rows.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
        traces_[{label, batch}] = std::move(rows);
    }

    bool has_trace(const std::string& label, int batch) const {
        return traces_.count({label, batch}) != 0;
    }

    bool has_model(const std::string& label) const {
        auto it = traces_.lower_bound({label, 0});
        return it != traces_.end() && it->first.first == label;
    }

    // Hold-previous lookup with cyclic wrap past the end of the trace. The
    // period extends one sample spacing beyond the last row, so a two-row
    // trace at t=0,1 covers two seconds before wrapping.
    double power_w(const std::string& label, int batch, double t) const {
        auto it = traces_.find({label, batch});
        if (it == traces_.end())
            throw ConfigError("trace.unknown",
                              "no trace for " + label + " at batch " + std::to_string(batch));
        const auto& rows = it->second;
        double period;
        if (rows.size() < 2) {
            period = rows.back().t + 1.0;
        } else {
            period = rows.back().t + (rows.back().t - rows[rows.size() - 2].t);
        }
        double tt = std::fmod(t, period);
        if (tt < 0) tt += period;
        // last row with row.t <= tt; before the first row, hold the first.
        auto ub = std::upper_bound(rows.begin(), rows.end(), tt,
                                   [](double v, const Sample& r) { return v < r.t; });
        if (ub == rows.begin()) return rows.front().power_w;
        return std::prev(ub)->power_w;
    }

    const std::map<std::string, LogisticFit>& itl_fits() const { return itl_fits_; }

    void set_itl_fit(const std::string& label, const LogisticFit& f) { itl_fits_[label] = f; }

private:
    std::map<std::pair<std::string, int>, std::vector<Sample>> traces_;
    std::map<std::string, LogisticFit> itl_fits_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

} // namespace detail

inline void load_trace_csv(TraceStore& store, const std::string& label, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("trace.open_failed", "cannot open trace: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError("trace.empty", path + ": empty trace file");
    {
        auto hdr = detail::split_csv_line(line);
        if (hdr.size() != 3 || hdr[0] != "batch_size" || hdr[1] != "relative_time_s" ||
            hdr[2] != "power_w")
            throw ConfigError("trace.bad_header",
                              path + ": expected header batch_size,relative_time_s,power_w");
    }
    std::map<int, std::vector<TraceStore::Sample>> by_batch;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw ConfigError("trace.bad_row",
                              path + ":" + std::to_string(lineno) + ": expected 3 columns");
        try {
            const int batch = std::stoi(cells[0]);
            by_batch[batch].push_back({std::stod(cells[1]), std::stod(cells[2])});
        } catch (const std::exception&) {
            throw ConfigError("trace.bad_row",
                              path + ":" + std::to_string(lineno) + ": unparseable number");
        }
    }
    if (by_batch.empty())
        throw ConfigError("trace.empty", path + ": no data rows");
    for (auto& [batch, rows] : by_batch) store.add_trace(label, batch, std::move(rows));
}

// Load a store root: one subdirectory per model label holding trace.csv and
// optionally itl_fit.json.
inline TraceStore load_trace_store(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw IoError("trace.open_failed", "trace store root is not a directory: " + root);
    TraceStore store;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const std::string label = dir.filename().string();
        const fs::path csv = dir / "trace.csv";
        if (fs::exists(csv)) load_trace_csv(store, label, csv.string());
        const fs::path fit = dir / "itl_fit.json";
        if (fs::exists(fit)) {
            std::ifstream in(fit);
            nlohmann::json j;
            try {
                in >> j;
                store.set_itl_fit(label, j.get<LogisticFit>());
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("trace.bad_itl_fit", fit.string() + ": " + e.what());
            }
        }
    }
    return store;
}

} // namespace openg2g
