#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rec/tensor.hpp"

namespace rec {

// Container format: a text manifest (format version, model kind, meta pairs,
// named tensor list with shapes) followed by raw little-endian float32
// payloads in manifest order. Save/load round-trips bit-exactly.
struct Checkpoint {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, TensorPtr>> tensors;

    void add(const std::string& name, const TensorPtr& t) { tensors.emplace_back(name, t); }
    void set_meta(const std::string& key, const std::string& value);
    std::string get_meta(const std::string& key, const std::string& fallback = "") const;
    TensorPtr find(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // FNV-1a over the serialized bytes; stable artifact identity
    uint64_t content_hash() const;
};

}  // namespace rec
