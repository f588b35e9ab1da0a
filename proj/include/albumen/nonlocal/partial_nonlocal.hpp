#pragma once

#include <cmath>
#include <vector>

#include "albumen/core/autograd.hpp"
#include "albumen/core/image.hpp"
#include "albumen/nn/layers.hpp"

namespace albumen {

/// 1x1 embedding maps of the partial nonlocal block: theta/phi/mu project the
/// C-channel features to the C_g-dim affinity space, nu maps back to C.
struct PartialNonlocalParams {
    Var theta_w, theta_b, phi_w, phi_b, mu_w, mu_b, nu_w, nu_b;
    int channels = 0, embed = 0;

    PartialNonlocalParams() = default;
    PartialNonlocalParams(int C, int Cg, Rng& rng, float wstd = 0.02f)
        : channels(C), embed(Cg) {
        auto mk = [&](int rows, int cols) {
            return make_var(Tensor::randn({rows, cols}, rng, wstd), true);
        };
        theta_w = mk(Cg, C);
        phi_w = mk(Cg, C);
        mu_w = mk(Cg, C);
        nu_w = mk(C, Cg);
        theta_b = make_var(Tensor::zeros({Cg}), true);
        phi_b = make_var(Tensor::zeros({Cg}), true);
        mu_b = make_var(Tensor::zeros({Cg}), true);
        nu_b = make_var(Tensor::zeros({C}), true);
    }

    void params(ParamList& out, const std::string& prefix) const {
        add_param(out, prefix + ".theta_w", theta_w);
        add_param(out, prefix + ".theta_b", theta_b);
        add_param(out, prefix + ".phi_w", phi_w);
        add_param(out, prefix + ".phi_b", phi_b);
        add_param(out, prefix + ".mu_w", mu_w);
        add_param(out, prefix + ".mu_b", mu_b);
        add_param(out, prefix + ".nu_w", nu_w);
        add_param(out, prefix + ".nu_b", nu_b);
    }
};

namespace detail {

inline Tensor as_feature_matrix(const Tensor& f) {
    if (f.ndim() == 2) return f;
    if (f.ndim() == 3) return f.reshaped({f.dim(0), f.dim(1) * f.dim(2)});
    throw InvalidInputError("feature map must be (C,HW) or (C,H,W)");
}

/// keep[j] = 1 - m[j], flattened row-major.
inline Tensor keep_from_mask(const Tensor& mask, int hw) {
    if (mask.numel() != hw) throw InvalidInputError("mask length does not match HW");
    Tensor keep({hw});
    for (int j = 0; j < hw; ++j) {
        const float v = mask[j];
        if (v != 0.0f && v != 1.0f) throw InvalidInputError("mask must be binary");
        keep[j] = 1.0f - v;
    }
    return keep;
}

inline std::vector<std::vector<double>> embed_columns(const Tensor& F, const Tensor& w,
                                                      const Tensor& b) {
    const int C = F.dim(0), HW = F.dim(1), E = w.dim(0);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(HW),
                                         std::vector<double>(static_cast<std::size_t>(E)));
    for (int j = 0; j < HW; ++j)
        for (int e = 0; e < E; ++e) {
            double s = b[e];
            for (int c = 0; c < C; ++c) s += double(w.at2(e, c)) * F.at2(c, j);
            out[static_cast<std::size_t>(j)][static_cast<std::size_t>(e)] = s;
        }
    return out;
}

}  // namespace detail

/// f[i,j] = exp(theta(F_i)^T phi(F_j)). Small-instance diagnostic form; the
/// training path normalizes with max-subtracted logits instead.
inline Tensor pairwise_affinity(const Tensor& feature, const PartialNonlocalParams& p) {
    const Tensor F = detail::as_feature_matrix(feature);
    if (!all_finite(F)) throw InvalidInputError("pairwise_affinity: non-finite features");
    const int HW = F.dim(1);
    const auto th = detail::embed_columns(F, p.theta_w->val, p.theta_b->val);
    const auto ph = detail::embed_columns(F, p.phi_w->val, p.phi_b->val);
    Tensor f({HW, HW});
    for (int i = 0; i < HW; ++i)
        for (int j = 0; j < HW; ++j) {
            double dot = 0.0;
            for (std::size_t e = 0; e < th[0].size(); ++e)
                dot += th[static_cast<std::size_t>(i)][e] * ph[static_cast<std::size_t>(j)][e];
            f.at2(i, j) = static_cast<float>(std::exp(dot));
        }
    return f;
}

/// s[i,j] = (1-m_j) f[i,j] / sum_k (1-m_k) f[i,k]; rows with an all-masked
/// denominator are zero.
inline Tensor masked_affinity(const Tensor& f, const Tensor& mask_flat) {
    if (f.ndim() != 2 || f.dim(0) != f.dim(1))
        throw InvalidInputError("masked_affinity: f must be square");
    const int HW = f.dim(0);
    const Tensor keep = detail::keep_from_mask(mask_flat, HW);
    Tensor s({HW, HW});
    for (int i = 0; i < HW; ++i) {
        double denom = 0.0;
        for (int k = 0; k < HW; ++k)
            if (keep[k] != 0.0f) denom += f.at2(i, k);
        if (denom == 0.0) continue;
        for (int j = 0; j < HW; ++j)
            if (keep[j] != 0.0f) s.at2(i, j) = static_cast<float>(f.at2(i, j) / denom);
    }
    return s;
}

/// O_i = nu(sum_j s[i,j] mu(F_j)) on the tape, one (C,HW) sample.
/// Logits are normalized via masked softmax (max subtraction), which equals
/// the affinity quotient above wherever it is defined.
inline Var partial_nonlocal_sample(const Var& feat_mat, const Tensor& keep,
                                   const PartialNonlocalParams& p) {
    const Var a = add_col_bias(matmul(p.theta_w, feat_mat), p.theta_b);
    const Var b = add_col_bias(matmul(p.phi_w, feat_mat), p.phi_b);
    const Var logits = matmul(a, b, true, false);  // (HW,HW)
    const Var s = masked_softmax_rows(logits, keep);
    const Var m = add_col_bias(matmul(p.mu_w, feat_mat), p.mu_b);
    const Var y = matmul(m, s, false, true);  // column i = sum_j s[i,j] mu(F_j)
    return add_col_bias(matmul(p.nu_w, y), p.nu_b);
}

/// Batched forward over (N,C,H,W) with the mask at feature resolution.
inline Var partial_nonlocal_forward(const Var& x, const DefectMask& mask,
                                    const PartialNonlocalParams& p) {
    if (x->val.ndim() != 4) throw InvalidInputError("partial_nonlocal: input rank != 4");
    const int C = x->val.dim(1), H = x->val.dim(2), W = x->val.dim(3);
    if (mask.height() != H || mask.width() != W)
        throw InvalidInputError("partial_nonlocal: mask resolution mismatch");
    const Tensor keep = detail::keep_from_mask(mask.m.reshaped({H * W}), H * W);
    std::vector<Var> outs;
    for (int n = 0; n < x->val.dim(0); ++n)
        outs.push_back(partial_nonlocal_sample(select_sample(x, n), keep, p));
    return stack_samples(outs, C, H, W);
}

/// Plain-tensor convenience wrapper (no gradients).
inline Tensor partial_nonlocal_forward(const Tensor& feature, const DefectMask& mask,
                                       const PartialNonlocalParams& p) {
    NoGradGuard ng;
    Tensor F = feature.ndim() == 3
                   ? feature.reshaped({1, feature.dim(0), feature.dim(1), feature.dim(2)})
                   : feature;
    const Var out = partial_nonlocal_forward(make_var(F, false), mask, p);
    return feature.ndim() == 3 ? batch_to_image(out->val) : out->val;
}

/// Eq.-10 fusion on plain tensors: intact positions from the local branch,
/// defect positions from the global branch, mask broadcast over channels.
inline Tensor fuse_branches(const Tensor& local_out, const Tensor& global_out,
                            const DefectMask& mask) {
    if (!local_out.same_shape(global_out))
        throw InvalidInputError("fuse_branches: branch shapes differ");
    const Tensor* l = &local_out;
    const int nd = l->ndim();
    if (nd != 3 && nd != 4) throw InvalidInputError("fuse_branches: rank must be 3 or 4");
    const int H = l->dim(nd - 2), W = l->dim(nd - 1);
    if (mask.height() != H || mask.width() != W)
        throw InvalidInputError("fuse_branches: mask resolution mismatch");
    Tensor out = local_out;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t nplanes = out.data.size() / plane;
    for (std::size_t pidx = 0; pidx < nplanes; ++pidx)
        for (std::size_t i = 0; i < plane; ++i)
            if (mask.m.data[i] != 0.0f)
                out.data[pidx * plane + i] = global_out.data[pidx * plane + i];
    return out;
}

}  // namespace albumen
