// runner.hpp
// Config-file loading, scenario dispatch and output writing for the CLI:
// flat key=value configs, CSV/JSON result tables and a run manifest with
// content hashes, written on both success and failure paths.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ewsim/errors.hpp"
#include "ewsim/experiments.hpp"
#include "ewsim/protocol.hpp"

namespace ewsim::runner {

using json = nlohmann::ordered_json;

// --- config file -----------------------------------------------------------

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + v);
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + v);
    }
}

inline void apply_config_entry(protocol::ProtocolConfig& cfg, const std::string& key,
                               const std::string& value) {
    using protocol::PulseRole;
    if (key == "write_energy_pj") cfg.set_energy(PulseRole::Write, parse_double(value, key));
    else if (key == "read1_energy_pj") cfg.set_energy(PulseRole::Read1, parse_double(value, key));
    else if (key == "probe_energy_pj") cfg.set_energy(PulseRole::Probe, parse_double(value, key));
    else if (key == "read2_energy_pj") cfg.set_energy(PulseRole::Read2, parse_double(value, key));
    else if (key == "k_cal") cfg.k_cal = parse_double(value, key);
    else if (key == "retrieval_sin2_r1") cfg.retrieval_sin2_r1 = parse_double(value, key);
    else if (key == "retrieval_sin2_r2") cfg.retrieval_sin2_r2 = parse_double(value, key);
    else if (key == "s2_scatter") cfg.s2_scatter = parse_bool(value, key);
    else if (key == "storage_time_ns") cfg.storage_time_ns = parse_double(value, key);
    else if (key == "tau1_ns") cfg.tau1_ns = parse_double(value, key);
    else if (key == "tau2_ns") cfg.tau2_ns = parse_double(value, key);
    else if (key == "det_eff_s") cfg.det_eff_s = parse_double(value, key);
    else if (key == "det_eff_as") cfg.det_eff_as = parse_double(value, key);
    else if (key == "dark_prob") cfg.dark_prob = parse_double(value, key);
    else if (key == "delay_mode") {
        if (value == "2m") cfg.delay_mode = protocol::DelayMode::Fiber2m;
        else if (value == "50m") cfg.delay_mode = protocol::DelayMode::Fiber50m;
        else throw ConfigError("config: delay_mode must be 2m or 50m");
    }
    else if (key == "n_max") cfg.n_max = static_cast<int>(parse_double(value, key));
    else if (key == "trials") cfg.trials = static_cast<std::uint64_t>(parse_double(value, key));
    else if (key == "master_seed") cfg.master_seed = static_cast<std::uint64_t>(parse_double(value, key));
    else if (key == "mzi_enabled") cfg.mzi_enabled = parse_bool(value, key);
    else if (key == "mzi_beta") cfg.mzi_beta = parse_double(value, key);
    else if (key == "mzi_phase_sigma") cfg.mzi_phase_sigma = parse_double(value, key);
    else if (key == "mzi_split_sin2") cfg.mzi_split_sin2 = parse_double(value, key);
    else if (key == "eta_2ud") cfg.eta_2ud = parse_double(value, key);
    else throw ConfigError("config: unknown key: " + key);
}

// Flat key=value text; '#' starts a comment; unknown keys are errors.
inline protocol::ProtocolConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path);
    protocol::ProtocolConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

// "start:stop:count" -> count evenly spaced values including both endpoints.
inline std::vector<double> parse_betas(const std::string& spec) {
    const std::size_t c1 = spec.find(':');
    const std::size_t c2 = spec.find(':', c1 == std::string::npos ? 0 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError("--betas expects start:stop:count");
    const double start = parse_double(spec.substr(0, c1), "betas.start");
    const double stop = parse_double(spec.substr(c1 + 1, c2 - c1 - 1), "betas.stop");
    const int count = static_cast<int>(parse_double(spec.substr(c2 + 1), "betas.count"));
    if (count < 2) throw ConfigError("--betas needs count >= 2");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(start + (stop - start) * static_cast<double>(i) /
                                  static_cast<double>(count - 1));
    return out;
}

// --- output ----------------------------------------------------------------

inline std::string result_to_csv(const experiments::ScenarioResult& res) {
    std::ostringstream os;
    for (std::size_t i = 0; i < res.columns.size(); ++i)
        os << (i ? "," : "") << res.columns[i];
    os << "\r\n";
    char buf[64];
    for (const auto& row : res.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.10g", row[i]);
            os << (i ? "," : "") << buf;
        }
        os << "\r\n";
    }
    return os.str();
}

inline json result_to_json(const experiments::ScenarioResult& res) {
    json j;
    j["name"] = res.name;
    j["columns"] = res.columns;
    j["rows"] = res.rows;
    json verdicts = json::array();
    for (const auto& a : res.verdicts) {
        json v;
        v["assertion"] = a.name;
        v["status"] = experiments::status_name(a.status);
        v["margin"] = a.margin;
        v["detail"] = a.detail;
        verdicts.push_back(std::move(v));
    }
    j["verdicts"] = std::move(verdicts);
    j["passed"] = res.passed();
    return j;
}

inline json stats_to_json(const CoincidenceStats& stats) {
    json j;
    j["trials"] = stats.n_trials;
    json singles;
    for (int i = 0; i < kNumChannels; ++i)
        singles[std::string(channel_name(static_cast<Channel>(i)))] =
            stats.singles[static_cast<std::size_t>(i)];
    j["singles"] = std::move(singles);
    json pairs;
    for (int i = 0; i < kNumChannels; ++i)
        for (int k = i + 1; k < kNumChannels; ++k) {
            const std::uint64_t c = stats.pairs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            if (c == 0) continue;
            pairs[std::string(channel_name(static_cast<Channel>(i))) + "&" +
                  std::string(channel_name(static_cast<Channel>(k)))] = c;
        }
    j["pairs"] = std::move(pairs);
    return j;
}

// --- manifest ---------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct RunManifest {
    std::string scenario;
    std::string config_path;
    std::string out_dir;
    std::uint64_t master_seed = 0;
    std::uint64_t trials = 0;
    std::vector<std::pair<std::string, std::uint64_t>> files; // (name, hash)
    std::string status = "incomplete";

    void record(const std::string& name, const std::string& content) {
        files.emplace_back(name, fnv1a64(content));
    }

    void write(const std::string& path) const {
        json j;
        j["scenario"] = scenario;
        j["config"] = config_path;
        j["out_dir"] = out_dir;
        j["master_seed"] = master_seed;
        j["trials"] = trials;
        j["status"] = status;
        json fl = json::array();
        for (const auto& [name, hash] : files) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
            fl.push_back({{"file", name}, {"fnv1a64", buf}});
        }
        j["files"] = std::move(fl);
        std::ofstream out(path, std::ios::binary);
        out << j.dump(2) << '\n';
    }
};

inline void write_file(const std::filesystem::path& dir, const std::string& name,
                       const std::string& content, RunManifest& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << content;
    manifest.record(name, content);
}

} // namespace ewsim::runner
