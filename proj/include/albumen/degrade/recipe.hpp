#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "albumen/core/errors.hpp"
#include "albumen/core/rng.hpp"

namespace albumen {

enum class OpKind { GaussianNoise, GaussianBlur, Jpeg, ColorJitter, BoxBlur };

inline const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::GaussianNoise: return "gaussian_noise";
        case OpKind::GaussianBlur: return "gaussian_blur";
        case OpKind::Jpeg: return "jpeg";
        case OpKind::ColorJitter: return "color_jitter";
        case OpKind::BoxBlur: return "box_blur";
    }
    return "?";
}

inline OpKind op_kind_from(const std::string& s) {
    if (s == "gaussian_noise") return OpKind::GaussianNoise;
    if (s == "gaussian_blur") return OpKind::GaussianBlur;
    if (s == "jpeg") return OpKind::Jpeg;
    if (s == "color_jitter") return OpKind::ColorJitter;
    if (s == "box_blur") return OpKind::BoxBlur;
    throw InvalidParameterError("unknown degradation op: " + s);
}

/// One sampled degradation step. Parameters live on the 0-255 scale where the
/// recipe ranges are defined; ops divide by 255 internally.
struct DegradationOp {
    OpKind kind;
    double sigma = 0.0;                   // noise / blur stddev
    int k = 0;                            // kernel size
    int quality = 0;                      // jpeg
    std::array<double, 3> shifts{0, 0, 0};  // color jitter
};

struct DegradationRecipe {
    std::uint64_t seed = 0;
    double drop_prob = 0.3;
    std::vector<DegradationOp> ops;
};

/// Sample a recipe: random permutation of the five op kinds, each dropped
/// independently with `drop_prob`, parameters uniform in their ranges.
/// Fully determined by `seed`.
inline DegradationRecipe make_recipe(std::uint64_t seed, double drop_prob = 0.3) {
    if (drop_prob < 0.0 || drop_prob > 1.0)
        throw InvalidParameterError("make_recipe: drop_prob outside [0,1]");
    Rng rng(seed);
    std::array<OpKind, 5> order{OpKind::GaussianNoise, OpKind::GaussianBlur, OpKind::Jpeg,
                                OpKind::ColorJitter, OpKind::BoxBlur};
    for (int i = 4; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

    static constexpr std::array<int, 3> kKernels{3, 5, 7};
    DegradationRecipe r;
    r.seed = seed;
    r.drop_prob = drop_prob;
    for (OpKind kind : order) {
        const bool dropped = rng.bernoulli(drop_prob);
        DegradationOp op;
        op.kind = kind;
        switch (kind) {
            case OpKind::GaussianNoise:
                op.sigma = rng.uniform(5.0, 50.0);
                break;
            case OpKind::GaussianBlur:
                op.k = kKernels[static_cast<std::size_t>(rng.uniform_int(0, 2))];
                op.sigma = rng.uniform(1.0, 5.0);
                break;
            case OpKind::Jpeg:
                op.quality = rng.uniform_int(41, 99);
                break;
            case OpKind::ColorJitter:
                for (auto& s : op.shifts) s = rng.uniform(-20.0, 20.0);
                break;
            case OpKind::BoxBlur:
                op.k = kKernels[static_cast<std::size_t>(rng.uniform_int(0, 2))];
                break;
        }
        if (!dropped) r.ops.push_back(op);
    }
    return r;
}

inline std::string serialize_recipe(const DegradationRecipe& r) {
    std::ostringstream out;
    out.precision(17);
    out << "seed=" << r.seed << "\n";
    out << "drop_prob=" << r.drop_prob << "\n";
    for (const auto& op : r.ops) {
        out << op_kind_name(op.kind);
        switch (op.kind) {
            case OpKind::GaussianNoise: out << " sigma=" << op.sigma; break;
            case OpKind::GaussianBlur: out << " k=" << op.k << " sigma=" << op.sigma; break;
            case OpKind::Jpeg: out << " quality=" << op.quality; break;
            case OpKind::ColorJitter:
                out << " r=" << op.shifts[0] << " g=" << op.shifts[1] << " b=" << op.shifts[2];
                break;
            case OpKind::BoxBlur: out << " k=" << op.k; break;
        }
        out << "\n";
    }
    return out.str();
}

inline DegradationRecipe parse_recipe(const std::string& text) {
    DegradationRecipe r;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        auto val_of = [&line](const std::string& key) {
            const auto pos = line.find(key + "=");
            if (pos == std::string::npos)
                throw InvalidParameterError("recipe: missing " + key + " in: " + line);
            return std::stod(line.substr(pos + key.size() + 1));
        };
        if (head.rfind("seed=", 0) == 0) {
            r.seed = std::stoull(head.substr(5));
        } else if (head.rfind("drop_prob=", 0) == 0) {
            r.drop_prob = std::stod(head.substr(10));
        } else {
            DegradationOp op;
            op.kind = op_kind_from(head);
            switch (op.kind) {
                case OpKind::GaussianNoise: op.sigma = val_of("sigma"); break;
                case OpKind::GaussianBlur:
                    op.k = static_cast<int>(val_of("k"));
                    op.sigma = val_of("sigma");
                    break;
                case OpKind::Jpeg: op.quality = static_cast<int>(val_of("quality")); break;
                case OpKind::ColorJitter:
                    op.shifts = {val_of("r"), val_of("g"), val_of("b")};
                    break;
                case OpKind::BoxBlur: op.k = static_cast<int>(val_of("k")); break;
            }
            r.ops.push_back(op);
        }
    }
    return r;
}

}  // namespace albumen
