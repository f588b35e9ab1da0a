#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "albumen/core/errors.hpp"
#include "albumen/core/rng.hpp"

namespace albumen {

/// Dense row-major float tensor. Rank is dynamic; everything in the library
/// uses ranks 1..4 ((N,C,H,W) for network activations, (H,W) for masks,
/// (rows,cols) for matrices).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), fill);
    }

    static std::int64_t numel_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s), 0.0f); }
    static Tensor full(std::vector<int> s, float v) { return Tensor(std::move(s), v); }

    static Tensor randn(std::vector<int> s, Rng& rng, float stddev = 1.0f, float mean = 0.0f) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = mean + stddev * rng.normalf();
        return t;
    }

    static Tensor uniform(std::vector<int> s, Rng& rng, float lo, float hi) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = rng.uniformf(lo, hi);
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // Indexed accessors for the common ranks.
    float& at2(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    float at2(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

    float& at3(int c, int h, int w) {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    float at3(int c, int h, int w) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }

    float& at4(int n, int c, int h, int w) {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    float at4(int n, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    Tensor reshaped(std::vector<int> s) const {
        if (numel_of(s) != numel()) throw InvalidInputError("reshape: element count mismatch");
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }
};

inline bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline float tensor_min(const Tensor& t) {
    return *std::min_element(t.data.begin(), t.data.end());
}

inline float tensor_max(const Tensor& t) {
    return *std::max_element(t.data.begin(), t.data.end());
}

inline double tensor_mean(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data) s += v;
    return t.data.empty() ? 0.0 : s / static_cast<double>(t.data.size());
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(double(a.data[i]) - double(b.data[i]));
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    return m;
}

/// FNV-1a over the raw float bytes; used for determinism checks.
inline std::uint64_t tensor_fnv1a(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* b = reinterpret_cast<const unsigned char*>(t.data.data());
    for (std::size_t i = 0; i < t.data.size() * sizeof(float); ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + ")";
}

}  // namespace albumen
