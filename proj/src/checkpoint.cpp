#include "rec/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace rec {

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    for (auto& kv : meta)
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    meta.emplace_back(key, value);
}

std::string Checkpoint::get_meta(const std::string& key, const std::string& fallback) const {
    for (const auto& kv : meta)
        if (kv.first == key) return kv.second;
    return fallback;
}

TensorPtr Checkpoint::find(const std::string& name) const {
    for (const auto& nt : tensors)
        if (nt.first == name) return nt.second;
    fail("checkpoint: tensor not found: " + name);
}

static void serialize(const Checkpoint& ckpt, std::ostream& out) {
    out << "RECKPT 1\n";
    out << "kind " << ckpt.kind << "\n";
    for (const auto& kv : ckpt.meta) out << "meta " << kv.first << " " << kv.second << "\n";
    for (const auto& nt : ckpt.tensors) {
        out << "tensor " << nt.first << " " << nt.second->shape.size();
        for (int d : nt.second->shape) out << " " << d;
        out << "\n";
    }
    out << "payload\n";
    // float32 payload is written verbatim; this build targets little-endian hosts
    for (const auto& nt : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(nt.second->data.data()),
                  std::streamsize(nt.second->data.size() * sizeof(float)));
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    check(bool(out), "checkpoint: cannot open for writing: " + path);
    serialize(*this, out);
    check(bool(out), "checkpoint: write failed: " + path);
}

uint64_t Checkpoint::content_hash() const {
    std::ostringstream buf(std::ios::binary);
    serialize(*this, buf);
    const std::string s = buf.str();
    return fnv1a(s.data(), s.size());
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(bool(in), "checkpoint: cannot open: " + path);
    Checkpoint ckpt;
    std::string line;
    check(bool(std::getline(in, line)) && line == "RECKPT 1",
          "checkpoint: bad magic in " + path);
    while (std::getline(in, line)) {
        if (line == "payload") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "kind") {
            ls >> ckpt.kind;
        } else if (tag == "meta") {
            std::string k, v;
            ls >> k;
            std::getline(ls, v);
            if (!v.empty() && v[0] == ' ') v.erase(0, 1);
            ckpt.meta.emplace_back(k, v);
        } else if (tag == "tensor") {
            std::string name;
            size_t ndims = 0;
            ls >> name >> ndims;
            std::vector<int> shape(ndims);
            for (size_t i = 0; i < ndims; ++i) ls >> shape[i];
            check(bool(ls), "checkpoint: malformed tensor line: " + line);
            ckpt.tensors.emplace_back(name, make_tensor(shape));
        } else {
            fail("checkpoint: unknown manifest tag: " + tag);
        }
    }
    for (auto& nt : ckpt.tensors) {
        in.read(reinterpret_cast<char*>(nt.second->data.data()),
                std::streamsize(nt.second->data.size() * sizeof(float)));
        check(in.gcount() == std::streamsize(nt.second->data.size() * sizeof(float)),
              "checkpoint: truncated payload in " + path);
    }
    return ckpt;
}

}  // namespace rec
