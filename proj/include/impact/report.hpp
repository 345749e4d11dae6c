#pragma once

// CSV / JSON emission and the run manifest.  Every output file a command
// writes is listed in the manifest with its size and content hash; the
// manifest itself is written last.  Wall-clock time lives only here, so all
// other outputs are byte-reproducible.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "impact/errors.hpp"
#include "impact/rng.hpp"
#include "impact/scenario.hpp"

namespace impact {

/// Round-trip decimal formatting, '.' separator, no locale surprises.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Comma-delimited writer with a header row.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != header_.size()) throw EngineError("csv row width mismatch");
        rows_.push_back(row);
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw EngineError("cannot write '" + path + "'");
        for (std::size_t i = 0; i < header_.size(); ++i)
            out << (i ? "," : "") << header_[i];
        out << '\n';
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << (i ? "," : "") << format_double(row[i]);
            out << '\n';
        }
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EngineError("cannot hash '" + path + "'");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::json numerics_to_json(const NumericsConfig& n) {
    return {{"quad_order", n.quad_order},       {"mc_paths", n.mc_paths},
            {"time_steps", n.time_steps},       {"seed", n.seed},
            {"sv_tolerance", n.sv_tolerance},   {"root_tolerance", n.root_tolerance}};
}

/// Provenance record of one CLI run.
struct RunManifest {
    std::string command;
    std::string scenario_path;
    std::string out_dir;
    NumericsConfig numerics;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::vector<std::string> outputs;  // file names inside out_dir, manifest excluded

    void write() const {
        nlohmann::json j;
        j["engine_version"] = engine_version;
        j["command"] = command;
        j["scenario"] = scenario_path;
        j["out_dir"] = out_dir;
        j["numerics"] = numerics_to_json(numerics);
        j["seed"] = seed;
        j["wall_ms"] = wall_ms;
        j["outputs"] = nlohmann::json::array();
        for (const auto& name : outputs) {
            const std::string path = (std::filesystem::path(out_dir) / name).string();
            j["outputs"].push_back({{"name", name},
                                    {"bytes", std::filesystem::file_size(path)},
                                    {"fnv1a64", hex64(fnv1a64_file(path))}});
        }
        std::ofstream out(std::filesystem::path(out_dir) / "manifest.json",
                          std::ios::binary);
        if (!out) throw EngineError("cannot write manifest in '" + out_dir + "'");
        out << j.dump(2) << '\n';
    }
};

struct ManifestCheck {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Re-hash every file listed in DIR/manifest.json.
inline ManifestCheck check_manifest(const std::string& dir) {
    ManifestCheck r;
    const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        r.ok = false;
        r.problems.push_back("missing manifest.json in '" + dir + "'");
        return r;
    }
    nlohmann::json j;
    in >> j;
    for (const auto& entry : j.at("outputs")) {
        const std::string name = entry.at("name");
        const std::string path = (std::filesystem::path(dir) / name).string();
        if (!std::filesystem::exists(path)) {
            r.ok = false;
            r.problems.push_back(name + ": missing");
            continue;
        }
        const auto bytes = std::filesystem::file_size(path);
        if (bytes != entry.at("bytes").get<std::uintmax_t>()) {
            r.ok = false;
            r.problems.push_back(name + ": size changed");
            continue;
        }
        if (hex64(fnv1a64_file(path)) != entry.at("fnv1a64").get<std::string>()) {
            r.ok = false;
            r.problems.push_back(name + ": content hash changed");
        }
    }
    return r;
}

class WallClock {
  public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace impact
