#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "albumen/core/errors.hpp"
#include "albumen/nn/layers.hpp"

namespace albumen {

/// Versioned on-disk container: named float tensors plus a key=value config
/// echo. Raw little-endian float bytes, so save -> load -> forward is
/// bit-identical.
struct Checkpoint {
    static constexpr char kMagic[8] = {'A', 'L', 'B', 'C', 'K', 'P', 'T', '1'};
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, std::string> config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void set_config(const std::string& k, const std::string& v) { config[k] = v; }

    std::string config_or(const std::string& k, const std::string& fallback) const {
        auto it = config.find(k);
        return it == config.end() ? fallback : it->second;
    }

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }

    void add_params(const ParamList& ps) {
        for (const auto& [name, v] : ps) add(name, v->val);
    }

    /// Copy stored tensors into live parameters (names and shapes must match).
    void load_params(const ParamList& ps) const {
        std::map<std::string, const Tensor*> index;
        for (const auto& [name, t] : tensors) index[name] = &t;
        for (const auto& [name, v] : ps) {
            auto it = index.find(name);
            if (it == index.end())
                throw ConfigurationError("checkpoint: missing tensor '" + name + "'");
            if (it->second->shape != v->val.shape)
                throw ConfigurationError("checkpoint: shape mismatch for '" + name + "'");
            v->val.data = it->second->data;
        }
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot write checkpoint: " + path);
        f.write(kMagic, 8);
        write_u32(f, kVersion);
        std::string cfg;
        for (const auto& [k, v] : config) cfg += k + "=" + v + "\n";
        write_u64(f, cfg.size());
        f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
        write_u32(f, static_cast<std::uint32_t>(tensors.size()));
        for (const auto& [name, t] : tensors) {
            write_u32(f, static_cast<std::uint32_t>(name.size()));
            f.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_u32(f, static_cast<std::uint32_t>(t.shape.size()));
            for (int d : t.shape) write_u32(f, static_cast<std::uint32_t>(d));
            write_u64(f, t.data.size());
            f.write(reinterpret_cast<const char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        }
        if (!f) throw DataError("short write on checkpoint: " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ConfigurationError("missing checkpoint: " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, kMagic, 8) != 0)
            throw ConfigurationError("not a checkpoint file: " + path);
        if (read_u32(f) != kVersion) throw ConfigurationError("unsupported checkpoint version");
        Checkpoint ck;
        std::string cfg(read_u64(f), '\0');
        f.read(cfg.data(), static_cast<std::streamsize>(cfg.size()));
        std::size_t pos = 0;
        while (pos < cfg.size()) {
            const auto nl = cfg.find('\n', pos);
            const auto line = cfg.substr(pos, nl - pos);
            pos = nl == std::string::npos ? cfg.size() : nl + 1;
            const auto eq = line.find('=');
            if (eq != std::string::npos) ck.config[line.substr(0, eq)] = line.substr(eq + 1);
        }
        const std::uint32_t n = read_u32(f);
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string name(read_u32(f), '\0');
            f.read(name.data(), static_cast<std::streamsize>(name.size()));
            Tensor t;
            t.shape.resize(read_u32(f));
            for (auto& d : t.shape) d = static_cast<int>(read_u32(f));
            t.data.resize(read_u64(f));
            f.read(reinterpret_cast<char*>(t.data.data()),
                   static_cast<std::streamsize>(t.data.size() * sizeof(float)));
            ck.tensors.emplace_back(std::move(name), std::move(t));
        }
        if (!f) throw ConfigurationError("truncated checkpoint: " + path);
        return ck;
    }

private:
    static void write_u32(std::ostream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ostream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
    static std::uint32_t read_u32(std::istream& f) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::uint64_t read_u64(std::istream& f) {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }
};

/// FNV-1a over parameter bytes in list order; used for frozen-stage checks.
inline std::uint64_t param_hash(const ParamList& ps) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, v] : ps) {
        mix(name.data(), name.size());
        mix(v->val.data.data(), v->val.data.size() * sizeof(float));
    }
    return h;
}

}  // namespace albumen
