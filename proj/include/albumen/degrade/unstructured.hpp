#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "albumen/core/image.hpp"
#include "albumen/core/rng.hpp"
#include "albumen/degrade/recipe.hpp"
#include "albumen/io/image_io.hpp"

namespace albumen {

namespace detail {

inline void require_unit(const ImageTensor& img, const char* op) {
    if (img.range != Range::Unit)
        throw InvalidInputError(std::string(op) + ": image must be unit range");
}

inline std::vector<float> gaussian_kernel_1d(int k, double sigma) {
    std::vector<float> w(static_cast<std::size_t>(k));
    const int c = k / 2;
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        const double d = i - c;
        w[static_cast<std::size_t>(i)] =
            static_cast<float>(std::exp(-d * d / (2.0 * sigma * sigma)));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v = static_cast<float>(v / sum);
    return w;
}

/// Separable filter with replicate borders; `wk` must sum to 1.
inline Tensor filter_separable(const Tensor& src, const std::vector<float>& wk) {
    const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
    const int k = static_cast<int>(wk.size()), c = k / 2;
    Tensor tmp({C, H, W}), out({C, H, W});
    for (int ch = 0; ch < C; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float s = 0.0f;
                for (int i = 0; i < k; ++i)
                    s += wk[static_cast<std::size_t>(i)] *
                         src.at3(ch, y, std::clamp(x + i - c, 0, W - 1));
                tmp.at3(ch, y, x) = s;
            }
    for (int ch = 0; ch < C; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float s = 0.0f;
                for (int i = 0; i < k; ++i)
                    s += wk[static_cast<std::size_t>(i)] *
                         tmp.at3(ch, std::clamp(y + i - c, 0, H - 1), x);
                out.at3(ch, y, x) = s;
            }
    return out;
}

}  // namespace detail

/// Additive Gaussian white noise; sigma is on the 0-255 scale.
inline ImageTensor apply_gaussian_noise(const ImageTensor& img, double sigma,
                                        std::uint64_t seed) {
    detail::require_unit(img, "gaussian_noise");
    if (sigma < 0.0) throw InvalidParameterError("gaussian_noise: sigma < 0");
    Rng rng(seed);
    ImageTensor out = img;
    const float s = static_cast<float>(sigma / 255.0);
    for (auto& v : out.t.data) v = std::clamp(v + s * rng.normalf(), 0.0f, 1.0f);
    return out;
}

inline ImageTensor apply_gaussian_blur(const ImageTensor& img, int k, double sigma) {
    detail::require_unit(img, "gaussian_blur");
    if (k != 3 && k != 5 && k != 7)
        throw InvalidParameterError("gaussian_blur: kernel must be one of {3,5,7}");
    if (sigma <= 0.0) throw InvalidParameterError("gaussian_blur: sigma must be > 0");
    ImageTensor out = img;
    out.t = detail::filter_separable(img.t, detail::gaussian_kernel_1d(k, sigma));
    return out;
}

inline ImageTensor apply_jpeg(const ImageTensor& img, int quality) {
    detail::require_unit(img, "jpeg");
    if (quality < 1 || quality > 100)
        throw InvalidParameterError("jpeg: quality must be in [1,100]");
    ImageTensor out = img;
    out.t = jpeg_roundtrip(img.t, quality);
    return out;
}

/// Per-channel shift on the 0-255 scale.
inline ImageTensor apply_color_jitter(const ImageTensor& img,
                                      const std::array<double, 3>& shifts) {
    detail::require_unit(img, "color_jitter");
    if (img.channels() != 3) throw InvalidInputError("color_jitter: needs 3 channels");
    ImageTensor out = img;
    const int H = img.height(), W = img.width();
    for (int c = 0; c < 3; ++c) {
        const float d = static_cast<float>(shifts[static_cast<std::size_t>(c)] / 255.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.t.at3(c, y, x) = std::clamp(img.t.at3(c, y, x) + d, 0.0f, 1.0f);
    }
    return out;
}

inline ImageTensor apply_box_blur(const ImageTensor& img, int k) {
    detail::require_unit(img, "box_blur");
    if (k < 3 || k % 2 == 0) throw InvalidParameterError("box_blur: kernel must be odd, >= 3");
    ImageTensor out = img;
    out.t = detail::filter_separable(
        img.t, std::vector<float>(static_cast<std::size_t>(k), 1.0f / static_cast<float>(k)));
    return out;
}

/// Apply every op in the recipe in order. Noise draws its seed from the
/// recipe seed and the op index, so the result is a pure function of
/// (image, recipe).
inline ImageTensor synthesize_unstructured(const ImageTensor& img,
                                           const DegradationRecipe& recipe) {
    detail::require_unit(img, "synthesize_unstructured");
    ImageTensor cur = img;
    for (std::size_t i = 0; i < recipe.ops.size(); ++i) {
        const auto& op = recipe.ops[i];
        switch (op.kind) {
            case OpKind::GaussianNoise:
                cur = apply_gaussian_noise(cur, op.sigma,
                                           recipe.seed ^ (0x517cc1b727220a95ULL * (i + 1)));
                break;
            case OpKind::GaussianBlur: cur = apply_gaussian_blur(cur, op.k, op.sigma); break;
            case OpKind::Jpeg: cur = apply_jpeg(cur, op.quality); break;
            case OpKind::ColorJitter: cur = apply_color_jitter(cur, op.shifts); break;
            case OpKind::BoxBlur: cur = apply_box_blur(cur, op.k); break;
        }
    }
    return cur;
}

}  // namespace albumen
