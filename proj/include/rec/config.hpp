#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rec/common.hpp"

namespace rec {

// Flat key-value config with dotted section keys. One `key = value` pair per
// line; '#' starts a comment; later assignments win.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_text(const std::string& text, const std::string& origin = "<text>");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    int get_int(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::string& fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::string& fallback) const;

    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

// one violation string per broken invariant, each naming the field path;
// empty result means the command can be dispatched
std::vector<std::string> validate(const Config& cfg, const std::string& command);

}  // namespace rec
