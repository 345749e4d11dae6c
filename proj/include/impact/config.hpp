#pragma once

// Scenario files: key = value lines with nested [section] headers.  Field
// names mirror the scenario types; unknown keys are hard errors so typos in
// scientific configs cannot silently change a run.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "impact/scenario.hpp"

namespace impact {

namespace detail {

struct ConfigEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
    bool consumed = false;
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<ConfigEntry> tokenize_config(const std::string& text) {
    std::vector<ConfigEntry> entries;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config", "malformed section header at line " +
                                                    std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config",
                                  "expected key = value at line " + std::to_string(line_no));
        ConfigEntry e;
        e.section = section;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        e.line = line_no;
        if (e.key.empty())
            throw ValidationError("config", "empty key at line " + std::to_string(line_no));
        entries.push_back(std::move(e));
    }
    return entries;
}

inline double parse_double(const ConfigEntry& e) {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0')
        throw ValidationError(e.key, "expected a number, got '" + e.value + "' (line " +
                                         std::to_string(e.line) + ")");
    return v;
}

inline long long parse_int(const ConfigEntry& e) {
    char* end = nullptr;
    const long long v = std::strtoll(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0')
        throw ValidationError(e.key, "expected an integer, got '" + e.value + "' (line " +
                                         std::to_string(e.line) + ")");
    return v;
}

inline std::uint64_t parse_u64(const ConfigEntry& e) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0')
        throw ValidationError(e.key, "expected an unsigned integer, got '" + e.value +
                                         "' (line " + std::to_string(e.line) + ")");
    return v;
}

inline std::vector<double> parse_list(const ConfigEntry& e) {
    std::vector<double> out;
    std::istringstream in(e.value);
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw ValidationError(e.key, "expected a list of numbers (line " +
                                             std::to_string(e.line) + ")");
        out.push_back(v);
    }
    return out;
}

inline PiecewiseLinear build_payoff(const std::string& section,
                                    std::vector<ConfigEntry*>& entries) {
    std::string type = "linear";
    double strike = 0.0, slope = 1.0, level = 0.0;
    std::vector<double> breakpoints, slopes, anchor;
    bool saw_type = false;
    for (auto* e : entries) {
        if (e->key == "weight") continue;  // handled by the caller
        e->consumed = true;
        if (e->key == "type") {
            type = e->value;
            saw_type = true;
        } else if (e->key == "strike") {
            strike = parse_double(*e);
        } else if (e->key == "slope") {
            slope = parse_double(*e);
        } else if (e->key == "value") {
            level = parse_double(*e);
        } else if (e->key == "breakpoints") {
            breakpoints = parse_list(*e);
        } else if (e->key == "slopes") {
            slopes = parse_list(*e);
        } else if (e->key == "anchor") {
            anchor = parse_list(*e);
        } else {
            e->consumed = false;
        }
    }
    if (!saw_type) throw ValidationError(section + ".type", "payoff type is required");
    if (type == "call") return call_payoff(strike);
    if (type == "put") return put_payoff(strike);
    if (type == "straddle") return straddle_payoff(strike);
    if (type == "linear") return linear_payoff(slope);
    if (type == "constant") return constant_payoff(level);
    if (type == "custom") {
        PiecewiseLinear p;
        p.breakpoints = breakpoints;
        p.slopes = slopes;
        if (anchor.size() == 2) {
            p.anchor_x = anchor[0];
            p.anchor_y = anchor[1];
        } else if (!anchor.empty()) {
            throw ValidationError(section + ".anchor", "anchor takes two numbers: x y");
        } else if (!breakpoints.empty()) {
            p.anchor_x = breakpoints.front();
        }
        return p;
    }
    throw ValidationError(section + ".type", "unknown payoff type '" + type + "'");
}

}  // namespace detail

/// Parse a scenario from config text.  Throws ValidationError naming the key
/// (and line) of the first problem; unknown keys are rejected.
inline Scenario parse_scenario(const std::string& text) {
    auto entries = detail::tokenize_config(text);
    Scenario s;
    bool claim_seen = false;
    std::string claim_kind = "separable";

    // group the per-asset claim sections
    std::map<std::string, std::vector<detail::ConfigEntry*>> claim_assets;

    for (auto& e : entries) {
        if (e.section.empty()) {
            e.consumed = true;
            if (e.key == "J")
                s.num_assets = static_cast<int>(detail::parse_int(e));
            else if (e.key == "T")
                s.horizon = detail::parse_double(e);
            else if (e.key == "x")
                s.initial_wealth = detail::parse_double(e);
            else if (e.key == "tau")
                s.example1_time = detail::parse_double(e);
            else if (e.key == "threshold")
                s.hedge_threshold = detail::parse_double(e);
            else if (e.key == "traded") {
                if (e.value == "bachelier")
                    s.traded = Traded::bachelier;
                else if (e.value == "example1")
                    s.traded = Traded::example1;
                else
                    throw ValidationError("traded", "expected 'bachelier' or 'example1', got '" +
                                                        e.value + "'");
            } else
                e.consumed = false;
        } else if (e.section == "utility") {
            if (e.key == "term") {
                const auto pair = detail::parse_list(e);
                if (pair.size() != 2)
                    throw ValidationError("utility.term",
                                          "expected 'weight rate' (line " +
                                              std::to_string(e.line) + ")");
                s.utility.terms.push_back({pair[0], pair[1]});
                e.consumed = true;
            }
        } else if (e.section == "claim") {
            if (e.key == "kind") {
                claim_kind = e.value;
                claim_seen = true;
                e.consumed = true;
            }
        } else if (e.section.rfind("claim.", 0) == 0) {
            claim_assets[e.section].push_back(&e);
        } else if (e.section == "numerics") {
            e.consumed = true;
            if (e.key == "quad_order")
                s.numerics.quad_order = static_cast<int>(detail::parse_int(e));
            else if (e.key == "mc_paths")
                s.numerics.mc_paths = static_cast<int>(detail::parse_int(e));
            else if (e.key == "time_steps")
                s.numerics.time_steps = static_cast<int>(detail::parse_int(e));
            else if (e.key == "seed")
                s.numerics.seed = detail::parse_u64(e);
            else if (e.key == "sv_tolerance")
                s.numerics.sv_tolerance = detail::parse_double(e);
            else if (e.key == "root_tolerance")
                s.numerics.root_tolerance = detail::parse_double(e);
            else
                e.consumed = false;
        }
    }

    if (claim_seen && claim_kind != "separable")
        throw ValidationError("claim.kind",
                              "only 'separable' claims are expressible in config files");

    SeparableClaim claim;
    for (int j = 1; j <= s.num_assets; ++j) {
        const std::string section = "claim.asset" + std::to_string(j);
        auto it = claim_assets.find(section);
        if (it == claim_assets.end())
            throw ValidationError(section, "missing claim section for asset " +
                                               std::to_string(j));
        double weight = 1.0;
        for (auto* e : it->second) {
            if (e->key == "weight") {
                weight = detail::parse_double(*e);
                e->consumed = true;
            }
        }
        claim.payoffs.push_back(detail::build_payoff(section, it->second));
        claim.weights.push_back(weight);
    }
    s.claim = claim;

    for (const auto& e : entries) {
        if (!e.consumed) {
            const std::string where = e.section.empty() ? e.key : e.section + "." + e.key;
            throw ValidationError(where, "unknown key (line " + std::to_string(e.line) + ")");
        }
    }
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("scenario", "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace impact
