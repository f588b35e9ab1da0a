#pragma once

#include <cmath>
#include <vector>

#include "albumen/nonlocal/partial_nonlocal.hpp"

namespace albumen {

/// Brute-force scalar-loop evaluation of the block (affinity, masked
/// normalization, weighted average, output projection). No vectorized
/// shortcuts; exists for tests only and refuses instances above HW = 256.
inline Tensor oracle_partial_nonlocal(const Tensor& feature, const DefectMask& mask,
                                      const PartialNonlocalParams& p) {
    const Tensor F = detail::as_feature_matrix(feature);
    const int C = F.dim(0), HW = F.dim(1);
    if (HW > 256) throw SizeGuardError("oracle_partial_nonlocal: HW > 256");
    if (mask.m.numel() != HW)
        throw InvalidInputError("oracle_partial_nonlocal: mask length mismatch");

    const int E = p.embed;
    auto embed = [&](const Tensor& w, const Tensor& b, int j, int e) {
        double s = b[e];
        for (int c = 0; c < C; ++c) s += double(w.at2(e, c)) * F.at2(c, j);
        return s;
    };

    // s[i][j] per Eq. 7-8: exponentiated dot products, masked row normalization.
    std::vector<std::vector<double>> s(static_cast<std::size_t>(HW),
                                       std::vector<double>(static_cast<std::size_t>(HW), 0.0));
    for (int i = 0; i < HW; ++i) {
        double denom = 0.0;
        for (int j = 0; j < HW; ++j) {
            if (mask.m[j] != 0.0f) continue;
            double dot = 0.0;
            for (int e = 0; e < E; ++e)
                dot += embed(p.theta_w->val, p.theta_b->val, i, e) *
                       embed(p.phi_w->val, p.phi_b->val, j, e);
            const double f = std::exp(dot);
            s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = f;
            denom += f;
        }
        if (denom == 0.0) {
            for (int j = 0; j < HW; ++j) s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0.0;
            continue;
        }
        for (int j = 0; j < HW; ++j) s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /= denom;
    }

    Tensor out({C, HW});
    for (int i = 0; i < HW; ++i) {
        for (int c = 0; c < C; ++c) {
            double acc = p.nu_b->val[c];
            for (int e = 0; e < E; ++e) {
                double weighted = 0.0;
                for (int j = 0; j < HW; ++j) {
                    const double sij = s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    if (sij == 0.0) continue;
                    weighted += sij * embed(p.mu_w->val, p.mu_b->val, j, e);
                }
                acc += double(p.nu_w->val.at2(c, e)) * weighted;
            }
            out.at2(c, i) = static_cast<float>(acc);
        }
    }
    return feature.ndim() == 3 ? out.reshaped({C, feature.dim(1), feature.dim(2)}) : out;
}

}  // namespace albumen
