#pragma once

#include <array>
#include <complex>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "openg2g/common.hpp"

namespace openg2g {

using Complex = std::complex<double>;

// 3x3 complex series-impedance block in ohms; rows/cols follow phase order
// a,b,c, zero outside the line's phase set.
using ImpedanceMatrix = std::array<std::array<Complex, 3>, 3>;

struct Bus {
    std::string id;
    std::vector<Phase> phases;
    double v_base_ln_v = 0.0;  // nominal line-to-neutral magnitude, volts

    bool has_phase(Phase p) const {
        for (Phase q : phases)
            if (q == p) return true;
        return false;
    }
};

struct Line {
    std::string id;
    std::string from, to;
    std::vector<Phase> phases;
    ImpedanceMatrix z_ohm{};
};

struct LoadSpec {
    std::string bus;
    Phase phase = Phase::A;
    double kw = 0.0;
    double kvar = 0.0;
    std::string profile;  // optional time-varying-load profile id
};

struct PvSpec {
    std::string bus;
    Phase phase = Phase::A;
    double kw = 0.0;      // nameplate
    std::string profile;  // optional generation profile id
};

struct CapacitorSpec {
    std::string bus;
    Phase phase = Phase::A;
    double kvar = 0.0;  // injected reactive power
};

struct RegulatorSpec {
    std::string id;
    std::string line;
    double tap = 1.0;       // default/initial per-phase ratio
    double step = 0.00625;
    double tap_min = 0.90;
    double tap_max = 1.10;
};

struct DcAttachment {
    std::string id;   // datacenter id
    std::string bus;
};

struct FeederModel {
    std::string name;
    std::string source_bus;
    double source_pu = 1.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<RegulatorSpec> regulators;
    std::vector<LoadSpec> loads;
    std::vector<PvSpec> pv;
    std::vector<CapacitorSpec> capacitors;
    std::vector<DcAttachment> datacenters;
    nlohmann::json zones;  // reserved feeder-format field, unused by the solver

    const Bus& bus(const std::string& id) const {
        for (const auto& b : buses)
            if (b.id == id) return b;
        throw ConfigError("feeder.unknown_bus", "unknown bus: " + id);
    }
    const RegulatorSpec* regulator(const std::string& id) const {
        for (const auto& r : regulators)
            if (r.id == id) return &r;
        return nullptr;
    }
    const std::string& datacenter_bus(const std::string& dc_id) const {
        for (const auto& d : datacenters)
            if (d.id == dc_id) return d.bus;
        throw ConfigError("feeder.unknown_datacenter", "unknown datacenter id: " + dc_id);
    }
};

namespace detail {

inline std::vector<Phase> parse_phases(const std::string& s) {
    if (s.empty()) throw ConfigError("feeder.bad_phases", "empty phase set");
    std::vector<Phase> out;
    for (char c : s) out.push_back(phase_from_letter(c));
    for (std::size_t i = 1; i < out.size(); ++i)
        if (static_cast<int>(out[i]) <= static_cast<int>(out[i - 1]))
            throw ConfigError("feeder.bad_phases", "phases must be ascending: " + s);
    return out;
}

inline std::string phases_string(const std::vector<Phase>& ps) {
    std::string s;
    for (Phase p : ps) s += phase_letter(p);
    return s;
}

inline Complex parse_complex_pair(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("feeder.bad_impedance", "complex values are [re, im] pairs");
    return Complex(j[0].get<double>(), j[1].get<double>());
}

// Impedance forms: {"self": [r,x], "mutual": [r,x]} expands over the line's
// phases; {"matrix": [[[r,x],...],...]} gives the full k x k block in the
// order of the line's phase string.
inline ImpedanceMatrix parse_impedance(const nlohmann::json& j, const std::vector<Phase>& phases) {
    ImpedanceMatrix z{};
    if (j.contains("matrix")) {
        const auto& m = j.at("matrix");
        if (!m.is_array() || m.size() != phases.size())
            throw ConfigError("feeder.bad_impedance",
                              "impedance matrix must be k x k over the line's phases");
        for (std::size_t r = 0; r < phases.size(); ++r) {
            if (!m[r].is_array() || m[r].size() != phases.size())
                throw ConfigError("feeder.bad_impedance", "impedance matrix rows must have k entries");
            for (std::size_t c = 0; c < phases.size(); ++c)
                z[static_cast<int>(phases[r])][static_cast<int>(phases[c])] =
                    parse_complex_pair(m[r][c]);
        }
        return z;
    }
    if (j.contains("self")) {
        const Complex zs = parse_complex_pair(j.at("self"));
        const Complex zm = j.contains("mutual") ? parse_complex_pair(j.at("mutual")) : Complex(0, 0);
        for (Phase p : phases)
            for (Phase q : phases)
                z[static_cast<int>(p)][static_cast<int>(q)] = (p == q) ? zs : zm;
        return z;
    }
    throw ConfigError("feeder.bad_impedance", "line impedance needs \"self\" or \"matrix\"");
}

inline nlohmann::json impedance_to_json(const ImpedanceMatrix& z, const std::vector<Phase>& phases) {
    nlohmann::json m = nlohmann::json::array();
    for (Phase p : phases) {
        nlohmann::json row = nlohmann::json::array();
        for (Phase q : phases) {
            const Complex v = z[static_cast<int>(p)][static_cast<int>(q)];
            row.push_back({v.real(), v.imag()});
        }
        m.push_back(row);
    }
    return nlohmann::json{{"matrix", m}};
}

} // namespace detail

// Structural checks: single tree rooted at the source, consistent phase
// sets, resolvable references, taps inside range and on the step grid.
inline void validate(const FeederModel& f) {
    if (f.buses.empty()) throw ConfigError("feeder.empty", "feeder has no buses");
    std::map<std::string, const Bus*> by_id;
    for (const auto& b : f.buses) {
        if (by_id.count(b.id))
            throw ConfigError("feeder.duplicate_bus", "duplicate bus id: " + b.id);
        if (b.v_base_ln_v <= 0)
            throw ConfigError("feeder.bad_vbase", b.id + ": v_base_ln_v must be positive");
        if (b.phases.empty())
            throw ConfigError("feeder.bad_phases", b.id + ": bus needs at least one phase");
        by_id[b.id] = &b;
    }
    if (!by_id.count(f.source_bus))
        throw ConfigError("feeder.bad_source", "source bus not found: " + f.source_bus);
    if (f.source_pu <= 0)
        throw ConfigError("feeder.bad_source", "source voltage must be positive");

    std::map<std::string, std::string> parent;  // bus -> incoming line id
    std::map<std::string, const Line*> line_by_id;
    for (const auto& l : f.lines) {
        if (line_by_id.count(l.id))
            throw ConfigError("feeder.duplicate_line", "duplicate line id: " + l.id);
        line_by_id[l.id] = &l;
        if (!by_id.count(l.from) || !by_id.count(l.to))
            throw ConfigError("feeder.bad_line", l.id + ": endpoint bus not found");
        if (l.from == l.to)
            throw ConfigError("feeder.bad_line", l.id + ": self loop");
        if (parent.count(l.to))
            throw ConfigError("feeder.not_radial", l.to + " has two incoming lines");
        parent[l.to] = l.id;
        if (l.to == f.source_bus)
            throw ConfigError("feeder.not_radial", "line feeds the source bus");
        for (Phase p : l.phases) {
            if (!by_id.at(l.from)->has_phase(p) || !by_id.at(l.to)->has_phase(p))
                throw ConfigError("feeder.bad_phases",
                                  l.id + ": line phase " + std::string(1, phase_letter(p)) +
                                      " missing at an endpoint bus");
        }
        // every phase present downstream must be fed by the incoming line
        for (Phase p : by_id.at(l.to)->phases) {
            bool fed = false;
            for (Phase q : l.phases) fed = fed || (q == p);
            if (!fed)
                throw ConfigError("feeder.bad_phases",
                                  l.to + ": phase " + std::string(1, phase_letter(p)) +
                                      " is not carried by its feeding line");
        }
    }
    // reachability from the source through parent pointers = tree check
    for (const auto& b : f.buses) {
        if (b.id == f.source_bus) continue;
        std::set<std::string> seen;
        std::string cur = b.id;
        while (cur != f.source_bus) {
            if (!parent.count(cur))
                throw ConfigError("feeder.disconnected", b.id + " is not reachable from the source");
            if (!seen.insert(cur).second)
                throw ConfigError("feeder.not_radial", "cycle through " + b.id);
            cur = line_by_id.at(parent.at(cur))->from;
        }
    }

    std::set<std::string> reg_ids, reg_lines;
    for (const auto& r : f.regulators) {
        if (!reg_ids.insert(r.id).second)
            throw ConfigError("feeder.duplicate_regulator", "duplicate regulator id: " + r.id);
        if (!line_by_id.count(r.line))
            throw ConfigError("feeder.bad_regulator", r.id + ": unknown line " + r.line);
        if (!reg_lines.insert(r.line).second)
            throw ConfigError("feeder.bad_regulator", r.line + " has two regulators");
        if (r.step <= 0 || r.tap_min <= 0 || r.tap_max < r.tap_min)
            throw ConfigError("feeder.bad_regulator", r.id + ": bad tap range/step");
        if (r.tap < r.tap_min - 1e-12 || r.tap > r.tap_max + 1e-12)
            throw ConfigError("feeder.bad_regulator", r.id + ": default tap outside range");
    }

    auto check_attachment = [&](const std::string& bus, Phase p, const char* what) {
        auto it = by_id.find(bus);
        if (it == by_id.end())
            throw ConfigError("feeder.bad_attachment", std::string(what) + ": unknown bus " + bus);
        if (!it->second->has_phase(p))
            throw ConfigError("feeder.bad_attachment", std::string(what) + ": bus " + bus +
                                                           " lacks phase " + phase_letter(p));
    };
    for (const auto& l : f.loads) check_attachment(l.bus, l.phase, "load");
    for (const auto& p : f.pv) check_attachment(p.bus, p.phase, "pv");
    for (const auto& c : f.capacitors) check_attachment(c.bus, c.phase, "capacitor");
    std::set<std::string> dc_ids;
    for (const auto& d : f.datacenters) {
        if (!by_id.count(d.bus))
            throw ConfigError("feeder.bad_attachment", "datacenter " + d.id + ": unknown bus " + d.bus);
        if (!dc_ids.insert(d.id).second)
            throw ConfigError("feeder.duplicate_datacenter", "duplicate datacenter id: " + d.id);
    }
}

inline FeederModel parse_feeder(const nlohmann::json& j) {
    FeederModel f;
    try {
        f.name = j.value("name", "feeder");
        f.source_bus = j.at("source").at("bus").get<std::string>();
        f.source_pu = j.at("source").value("voltage_pu", 1.0);
        for (const auto& b : j.at("buses")) {
            Bus bus;
            bus.id = b.at("id").get<std::string>();
            bus.phases = detail::parse_phases(b.at("phases").get<std::string>());
            bus.v_base_ln_v = b.at("v_base_ln_v").get<double>();
            f.buses.push_back(std::move(bus));
        }
        for (const auto& l : j.at("lines")) {
            Line line;
            line.id = l.at("id").get<std::string>();
            line.from = l.at("from").get<std::string>();
            line.to = l.at("to").get<std::string>();
            line.phases = detail::parse_phases(l.at("phases").get<std::string>());
            line.z_ohm = detail::parse_impedance(l.at("z_ohm"), line.phases);
            f.lines.push_back(std::move(line));
        }
        for (const auto& r : j.value("regulators", nlohmann::json::array())) {
            RegulatorSpec reg;
            reg.id = r.at("id").get<std::string>();
            reg.line = r.at("line").get<std::string>();
            reg.tap = r.value("tap", 1.0);
            reg.step = r.value("step", 0.00625);
            reg.tap_min = r.value("min", 0.90);
            reg.tap_max = r.value("max", 1.10);
            f.regulators.push_back(reg);
        }
        for (const auto& l : j.value("loads", nlohmann::json::array())) {
            LoadSpec ld;
            ld.bus = l.at("bus").get<std::string>();
            ld.phase = phase_from_letter(l.at("phase").get<std::string>().at(0));
            ld.kw = l.value("kw", 0.0);
            ld.kvar = l.value("kvar", 0.0);
            ld.profile = l.value("profile", "");
            f.loads.push_back(std::move(ld));
        }
        for (const auto& p : j.value("pv", nlohmann::json::array())) {
            PvSpec pv;
            pv.bus = p.at("bus").get<std::string>();
            pv.phase = phase_from_letter(p.at("phase").get<std::string>().at(0));
            pv.kw = p.at("kw").get<double>();
            pv.profile = p.value("profile", "");
            f.pv.push_back(std::move(pv));
        }
        for (const auto& c : j.value("capacitors", nlohmann::json::array())) {
            CapacitorSpec cap;
            cap.bus = c.at("bus").get<std::string>();
            cap.phase = phase_from_letter(c.at("phase").get<std::string>().at(0));
            cap.kvar = c.at("kvar").get<double>();
            f.capacitors.push_back(std::move(cap));
        }
        for (const auto& d : j.value("datacenters", nlohmann::json::array())) {
            f.datacenters.push_back({d.at("id").get<std::string>(), d.at("bus").get<std::string>()});
        }
        f.zones = j.value("zones", nlohmann::json());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("feeder.parse_failed", std::string("feeder json: ") + e.what());
    }
    validate(f);
    return f;
}

inline FeederModel load_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("feeder.open_failed", "cannot open feeder: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("feeder.parse_failed", path + ": " + e.what());
    }
    return parse_feeder(j);
}

inline nlohmann::json feeder_to_json(const FeederModel& f) {
    nlohmann::json j;
    j["name"] = f.name;
    j["source"] = {{"bus", f.source_bus}, {"voltage_pu", f.source_pu}};
    j["buses"] = nlohmann::json::array();
    for (const auto& b : f.buses)
        j["buses"].push_back({{"id", b.id},
                              {"phases", detail::phases_string(b.phases)},
                              {"v_base_ln_v", b.v_base_ln_v}});
    j["lines"] = nlohmann::json::array();
    for (const auto& l : f.lines) {
        nlohmann::json lj = {{"id", l.id}, {"from", l.from}, {"to", l.to},
                             {"phases", detail::phases_string(l.phases)}};
        lj["z_ohm"] = detail::impedance_to_json(l.z_ohm, l.phases);
        j["lines"].push_back(std::move(lj));
    }
    j["regulators"] = nlohmann::json::array();
    for (const auto& r : f.regulators)
        j["regulators"].push_back({{"id", r.id}, {"line", r.line}, {"tap", r.tap},
                                   {"step", r.step}, {"min", r.tap_min}, {"max", r.tap_max}});
    j["loads"] = nlohmann::json::array();
    for (const auto& l : f.loads) {
        nlohmann::json lj = {{"bus", l.bus}, {"phase", std::string(1, phase_letter(l.phase))},
                             {"kw", l.kw}, {"kvar", l.kvar}};
        if (!l.profile.empty()) lj["profile"] = l.profile;
        j["loads"].push_back(std::move(lj));
    }
    j["pv"] = nlohmann::json::array();
    for (const auto& p : f.pv) {
        nlohmann::json pj = {{"bus", p.bus}, {"phase", std::string(1, phase_letter(p.phase))},
                             {"kw", p.kw}};
        if (!p.profile.empty()) pj["profile"] = p.profile;
        j["pv"].push_back(std::move(pj));
    }
    j["capacitors"] = nlohmann::json::array();
    for (const auto& c : f.capacitors)
        j["capacitors"].push_back({{"bus", c.bus},
                                   {"phase", std::string(1, phase_letter(c.phase))},
                                   {"kvar", c.kvar}});
    j["datacenters"] = nlohmann::json::array();
    for (const auto& d : f.datacenters)
        j["datacenters"].push_back({{"id", d.id}, {"bus", d.bus}});
    if (!f.zones.is_null()) j["zones"] = f.zones;
    return j;
}

} // namespace openg2g
