#include "rec/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace rec {

static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        check(eq != std::string::npos,
              origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        check(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    check(bool(in), "config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

std::string Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    check(it != values_.end(), "config: missing required key '" + key + "'");
    return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        fail("config: '" + key + "' is not an integer: " + it->second);
    }
}

int Config::get_int(const std::string& key) const {
    check(has(key), "config: missing required key '" + key + "'");
    return get_int(key, 0);
}

uint64_t Config::get_u64(const std::string& key) const {
    auto v = get_str(key);
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        fail("config: '" + key + "' is not an unsigned integer: " + v);
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        fail("config: '" + key + "' is not a number: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("config: '" + key + "' is not a boolean: " + v);
}

static std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        part = trim(part);
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

std::vector<double> Config::get_list(const std::string& key, const std::string& fallback) const {
    std::vector<double> out;
    for (const auto& p : split_commas(get_str(key, fallback))) {
        try {
            out.push_back(std::stod(p));
        } catch (const std::exception&) {
            fail("config: '" + key + "' has a non-numeric entry: " + p);
        }
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& key, const std::string& fallback) const {
    std::vector<int> out;
    for (double v : get_list(key, fallback)) out.push_back(int(v));
    return out;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

std::vector<std::string> validate(const Config& cfg, const std::string& command) {
    std::vector<std::string> violations;
    if (!cfg.has("seed")) violations.push_back("seed: missing master seed");

    // referenced checkpoint/table paths must exist when the command is dispatched
    static const char* path_keys[] = {"encoder.checkpoint", "backbone.checkpoint",
                                      "table.path", "dataset.snapshot"};
    for (const char* key : path_keys)
        if (cfg.has(key) && !std::filesystem::exists(cfg.get_str(key)))
            violations.push_back(std::string(key) + ": path does not exist: " +
                                 cfg.get_str(key));

    const bool synthetic = cfg.get_bool("dataset.synthetic", false);
    const bool needs_data =
        command != "ingest" && command != "synth" && !cfg.has("dataset.snapshot");
    if (needs_data && !synthetic) {
        for (const char* key : {"dataset.catalog", "dataset.interactions"}) {
            if (!cfg.has(key))
                violations.push_back(std::string(key) +
                                     ": required unless dataset.synthetic = true");
            else if (!std::filesystem::exists(cfg.get_str(key)))
                violations.push_back(std::string(key) + ": path does not exist: " +
                                     cfg.get_str(key));
        }
    }

    if (cfg.has("encoder.dim") && cfg.has("backbone.dim") &&
        cfg.get_int("encoder.dim", 0) != cfg.get_int("backbone.dim", 0))
        violations.push_back("backbone.dim: does not match encoder.dim");

    if (cfg.has("backbone.kind")) {
        auto kind = cfg.get_str("backbone.kind");
        if (kind != "sasrec" && kind != "bert4rec")
            violations.push_back("backbone.kind: expected sasrec or bert4rec, got " + kind);
    }
    return violations;
}

}  // namespace rec
