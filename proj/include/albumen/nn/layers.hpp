#pragma once

#include <string>
#include <utility>
#include <vector>

#include "albumen/core/autograd.hpp"
#include "albumen/core/rng.hpp"

namespace albumen {

/// Named parameter list; insertion order is the serialization order.
using ParamList = std::vector<std::pair<std::string, Var>>;

inline void add_param(ParamList& out, const std::string& name, const Var& v) {
    out.emplace_back(name, v);
}

struct Conv2d {
    Var w, b;
    int stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int k, int stride_, int pad_, Rng& rng, float wstd = 0.02f)
        : stride(stride_), pad(pad_) {
        w = make_var(Tensor::randn({out_ch, in_ch, k, k}, rng, wstd), true);
        b = make_var(Tensor::zeros({out_ch}), true);
    }

    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }

    void params(ParamList& out, const std::string& prefix) const {
        add_param(out, prefix + ".w", w);
        add_param(out, prefix + ".b", b);
    }
};

struct ConvTranspose2d {
    Var w, b;
    int stride = 2, pad = 1;

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_ch, int out_ch, int k, int stride_, int pad_, Rng& rng,
                    float wstd = 0.02f)
        : stride(stride_), pad(pad_) {
        w = make_var(Tensor::randn({in_ch, out_ch, k, k}, rng, wstd), true);
        b = make_var(Tensor::zeros({out_ch}), true);
    }

    Var operator()(const Var& x) const { return conv_transpose2d(x, w, b, stride, pad); }

    void params(ParamList& out, const std::string& prefix) const {
        add_param(out, prefix + ".w", w);
        add_param(out, prefix + ".b", b);
    }
};

/// x + conv(act(conv(x))), 3x3 kernels, width preserved.
struct ResBlock {
    Conv2d c1, c2;

    ResBlock() = default;
    ResBlock(int ch, Rng& rng) : c1(ch, ch, 3, 1, 1, rng), c2(ch, ch, 3, 1, 1, rng) {}

    Var operator()(const Var& x) const { return add(x, c2(leaky_relu(c1(x)))); }

    void params(ParamList& out, const std::string& prefix) const {
        c1.params(out, prefix + ".c1");
        c2.params(out, prefix + ".c2");
    }
};

inline void set_requires_grad(const ParamList& ps, bool flag) {
    for (const auto& [name, v] : ps) v->requires_grad = flag;
}

}  // namespace albumen
