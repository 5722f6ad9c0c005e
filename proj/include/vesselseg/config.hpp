// Run configuration: a key = value tree with [section] headers.
//
//   [preprocess]
//   window = 31
//   # comments start with '#'
//   [morlet]
//   scales = 2, 4, 8
//
// Keys may also be written fully qualified (`preprocess.window = 31`) and are
// overridden from the command line with `--set key=value`. Unknown keys are rejected.
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vesselseg/dataset_io.hpp"
#include "vesselseg/errors.hpp"
#include "vesselseg/format.hpp"
#include "vesselseg/gmm.hpp"
#include "vesselseg/morlet.hpp"
#include "vesselseg/postprocess.hpp"
#include "vesselseg/preprocess.hpp"

namespace vesselseg {

struct SynthConfig {
    int count = 10;
    int width = 256;
    int height = 256;
    int vessels = 14;
    int first_id = 1;

    bool operator==(const SynthConfig&) const = default;
};

struct RunConfig {
    // paths
    std::string train_root;
    std::string test_root;
    std::string model_path;
    std::string out_dir = "out";

    std::uint64_t seed = 0;
    int jobs = 1;

    GrayMethod grayscale = GrayMethod::green_channel;
    AheConfig ahe;

    MorletParams morlet;
    std::vector<double> scales = {2.0, 4.0, 8.0};
    double angle_step = 10.0;
    bool dump_responses = false;

    EmConfig em;
    std::size_t n_samples = 200000;
    bool equal_priors = false;

    PostConfig post;
    int roc_thresholds = 1000;

    SynthConfig synth;

    SweepConfig sweep() const { return {scales, angle_grid(angle_step)}; }

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError("invalid numeric value for " + key + ": '" + text + "'");
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = lower(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty list element in " + key);
        out.push_back(parse_number<double>(key, item));
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_double(v[i]);
    }
    return out;
}

struct ConfigKey {
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
    using K = ConfigKey;
    auto str = [](auto member) {
        return K{[member](RunConfig& c, const std::string&, const std::string& v) { std::invoke(member, c) = v; },
                 [member](const RunConfig& c) { return std::invoke(member, c); }};
    };
    auto integer = [](auto access) {
        return K{[access](RunConfig& c, const std::string& k, const std::string& v) {
                     auto& ref = access(c);
                     ref = parse_number<std::remove_reference_t<decltype(ref)>>(k, v);
                 },
                 [access](const RunConfig& c) { return std::to_string(access(c)); }};
    };
    auto real = [](auto access) {
        return K{[access](RunConfig& c, const std::string& k, const std::string& v) {
                     access(c) = parse_number<double>(k, v);
                 },
                 [access](const RunConfig& c) { return format_double(access(c)); }};
    };
    auto boolean = [](auto access) {
        return K{[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_bool(k, v); },
                 [access](const RunConfig& c) {
                     return std::string(access(c) ? "true" : "false");
                 }};
    };
    auto list = [](auto access) {
        return K{[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_list(k, v); },
                 [access](const RunConfig& c) { return format_list(access(c)); }};
    };

    static const std::map<std::string, ConfigKey> keys = {
        {"paths.train_root", str(&RunConfig::train_root)},
        {"paths.test_root", str(&RunConfig::test_root)},
        {"paths.model", str(&RunConfig::model_path)},
        {"paths.out", str(&RunConfig::out_dir)},
        {"run.seed", integer([](auto& c) -> auto& { return c.seed; })},
        {"run.jobs", integer([](auto& c) -> auto& { return c.jobs; })},
        {"preprocess.window", integer([](auto& c) -> auto& { return c.ahe.window; })},
        {"preprocess.fov_restricted", boolean([](auto& c) -> auto& { return c.ahe.fov_restricted; })},
        {"preprocess.grayscale",
         K{[](RunConfig& c, const std::string& k, const std::string& v) {
               const auto t = lower(v);
               if (t == "green") c.grayscale = GrayMethod::green_channel;
               else if (t == "luminance") c.grayscale = GrayMethod::luminance;
               else throw ConfigError("invalid value for " + k + ": '" + v + "' (green|luminance)");
           },
           [](const RunConfig& c) {
               return std::string(c.grayscale == GrayMethod::green_channel ? "green" : "luminance");
           }}},
        {"morlet.k0",
         K{[](RunConfig& c, const std::string& k, const std::string& v) {
               const auto l = parse_list(k, v);
               if (l.size() != 2) throw ConfigError(k + " needs exactly two components");
               c.morlet.k0 = {l[0], l[1]};
           },
           [](const RunConfig& c) { return format_list({c.morlet.k0[0], c.morlet.k0[1]}); }}},
        {"morlet.epsilon", real([](auto& c) -> auto& { return c.morlet.epsilon; })},
        {"morlet.scales", list([](auto& c) -> auto& { return c.scales; })},
        {"morlet.angle_step", real([](auto& c) -> auto& { return c.angle_step; })},
        {"morlet.dump_responses", boolean([](auto& c) -> auto& { return c.dump_responses; })},
        {"classifier.k", integer([](auto& c) -> auto& { return c.em.k_per_class; })},
        {"classifier.max_iters", integer([](auto& c) -> auto& { return c.em.max_iters; })},
        {"classifier.tol", real([](auto& c) -> auto& { return c.em.tol; })},
        {"classifier.cov_floor", real([](auto& c) -> auto& { return c.em.cov_floor; })},
        {"classifier.restarts", integer([](auto& c) -> auto& { return c.em.restarts; })},
        {"classifier.n_samples", integer([](auto& c) -> auto& { return c.n_samples; })},
        {"classifier.equal_priors", boolean([](auto& c) -> auto& { return c.equal_priors; })},
        {"classifier.seed", integer([](auto& c) -> auto& { return c.em.seed; })},
        {"post.median_radius", integer([](auto& c) -> auto& { return c.post.median_radius; })},
        {"post.opening_length", integer([](auto& c) -> auto& { return c.post.opening_length; })},
        {"post.min_component_length", integer([](auto& c) -> auto& { return c.post.min_component_length; })},
        {"post.directions", list([](auto& c) -> auto& { return c.post.directions; })},
        {"metrics.roc_thresholds", integer([](auto& c) -> auto& { return c.roc_thresholds; })},
        {"synth.count", integer([](auto& c) -> auto& { return c.synth.count; })},
        {"synth.width", integer([](auto& c) -> auto& { return c.synth.width; })},
        {"synth.height", integer([](auto& c) -> auto& { return c.synth.height; })},
        {"synth.vessels", integer([](auto& c) -> auto& { return c.synth.vessels; })},
        {"synth.first_id", integer([](auto& c) -> auto& { return c.synth.first_id; })},
    };
    return keys;
}

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, key, detail::trim(value));
}

/// Applies one `key=value` override.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: '" + assignment + "'");
    set_config_value(cfg, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline RunConfig parse_config(const std::string& text, RunConfig cfg = {}) {
    std::stringstream ss(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header on line " + std::to_string(line_no));
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value on line " + std::to_string(line_no));
        std::string key = detail::trim(line.substr(0, eq));
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        set_config_value(cfg, key, line.substr(eq + 1));
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text form; parse_config(to_config_text(c)) == c.
inline std::string to_config_text(const RunConfig& cfg) {
    std::string out, section;
    for (const auto& [key, entry] : detail::config_keys()) {
        const auto dot = key.find('.');
        const auto sec = key.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + entry.get(cfg) + "\n";
    }
    return out;
}

inline void validate(const RunConfig& cfg) {
    validate(cfg.ahe);
    validate(cfg.morlet);
    validate(cfg.sweep());
    validate(cfg.em);
    validate(cfg.post);
    if (cfg.jobs < 1) throw ConfigError("run.jobs must be >= 1");
    if (cfg.n_samples < 2) throw ConfigError("classifier.n_samples must be >= 2");
    if (cfg.roc_thresholds < 2) throw ConfigError("metrics.roc_thresholds must be >= 2");
    if (cfg.synth.count < 0 || cfg.synth.vessels < 0) throw ConfigError("synth counts must be non-negative");
    if (cfg.synth.width < 64 || cfg.synth.height < 64) throw ConfigError("synth dimensions must be >= 64");
}

}  // namespace vesselseg
