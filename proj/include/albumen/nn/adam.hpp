#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "albumen/nn/layers.hpp"

namespace albumen {

/// Adam over a fixed parameter list.
class Adam {
public:
    Adam() = default;
    Adam(ParamList params, double lr, double beta1 = 0.5, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (const auto& [name, v] : params_) {
            m_.push_back(Tensor::zeros(v->val.shape));
            v2_.push_back(Tensor::zeros(v->val.shape));
        }
    }

    void zero_grad() {
        for (const auto& [name, v] : params_) v->zero_grad();
    }

    /// One update; `lr_scale` applies the epoch schedule.
    void step(double lr_scale = 1.0) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, double(t_));
        const double bc2 = 1.0 - std::pow(b2_, double(t_));
        const double alpha = lr_ * lr_scale * std::sqrt(bc2) / bc1;
        for (std::size_t p = 0; p < params_.size(); ++p) {
            Var& v = params_[p].second;
            if (v->grad.data.empty()) continue;
            float* m = m_[p].data.data();
            float* s = v2_[p].data.data();
            float* g = v->grad.data.data();
            float* x = v->val.data.data();
            const std::size_t n = v->val.data.size();
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = static_cast<float>(b1_ * m[i] + (1.0 - b1_) * g[i]);
                s[i] = static_cast<float>(b2_ * s[i] + (1.0 - b2_) * double(g[i]) * g[i]);
                x[i] -= static_cast<float>(alpha * m[i] / (std::sqrt(double(s[i])) + eps_));
            }
        }
    }

    std::int64_t step_count() const { return t_; }

private:
    ParamList params_;
    std::vector<Tensor> m_, v2_;
    double lr_ = 2e-4, b1_ = 0.5, b2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

/// Constant for the first half of training, then linear decay to zero.
inline double linear_decay_factor(int epoch, int total_epochs) {
    const int hold = total_epochs / 2;
    if (epoch < hold) return 1.0;
    const int tail = total_epochs - hold;
    return tail > 0 ? double(total_epochs - epoch) / double(tail) : 0.0;
}

}  // namespace albumen
