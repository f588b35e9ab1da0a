#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "albumen/core/autograd.hpp"
#include "albumen/core/errors.hpp"
#include "albumen/core/tensor.hpp"

namespace albumen {

/// Declared value range of an image.
enum class Range { Unit, Signed };  // [0,1] or [-1,1]

/// C x H x W real image with a declared range. The pipeline currency:
/// degradation works in unit range, the networks in signed range.
struct ImageTensor {
    Tensor t;  // (C,H,W)
    Range range = Range::Unit;

    ImageTensor() = default;
    ImageTensor(Tensor tensor, Range r) : t(std::move(tensor)), range(r) { validate(); }

    int channels() const { return t.dim(0); }
    int height() const { return t.dim(1); }
    int width() const { return t.dim(2); }

    void validate() const {
        if (t.ndim() != 3) throw InvalidInputError("image: rank must be 3 (C,H,W)");
        const int C = t.dim(0);
        if (C != 1 && C != 3) throw InvalidInputError("image: channels must be 1 or 3");
        if (t.dim(1) < 1 || t.dim(2) < 1) throw InvalidInputError("image: empty spatial dims");
        const float lo = range == Range::Unit ? 0.0f : -1.0f;
        for (float v : t.data) {
            if (!std::isfinite(v)) throw InvalidInputError("image: non-finite value");
            if (v < lo - 1e-6f || v > 1.0f + 1e-6f)
                throw InvalidInputError("image: value outside declared range");
        }
    }
};

inline ImageTensor to_signed(const ImageTensor& img) {
    if (img.range == Range::Signed) return img;
    ImageTensor out;
    out.range = Range::Signed;
    out.t = img.t;
    for (auto& v : out.t.data) v = 2.0f * v - 1.0f;
    return out;
}

inline ImageTensor to_unit(const ImageTensor& img) {
    if (img.range == Range::Unit) return img;
    ImageTensor out;
    out.range = Range::Unit;
    out.t = img.t;
    for (auto& v : out.t.data) v = std::clamp(0.5f * (v + 1.0f), 0.0f, 1.0f);
    return out;
}

/// Binary H x W defect map: 1 = structured defect, 0 = intact.
struct DefectMask {
    Tensor m;  // (H,W), values in {0,1}

    DefectMask() = default;
    explicit DefectMask(Tensor t) : m(std::move(t)) { validate(); }
    static DefectMask zeros(int h, int w) { return DefectMask(Tensor::zeros({h, w})); }

    int height() const { return m.dim(0); }
    int width() const { return m.dim(1); }

    void validate() const {
        if (m.ndim() != 2) throw InvalidInputError("mask: rank must be 2");
        for (float v : m.data)
            if (v != 0.0f && v != 1.0f) throw InvalidInputError("mask: values must be 0/1");
    }

    std::int64_t positive_count() const {
        std::int64_t n = 0;
        for (float v : m.data) n += v != 0.0f;
        return n;
    }
};

inline DefectMask mask_union(const DefectMask& a, const DefectMask& b) {
    if (!a.m.same_shape(b.m)) throw InvalidInputError("mask union: shape mismatch");
    DefectMask out = a;
    for (std::size_t i = 0; i < out.m.data.size(); ++i)
        if (b.m.data[i] != 0.0f) out.m.data[i] = 1.0f;
    return out;
}

/// Conservative downscale: a cell is marked when any covered pixel is.
inline DefectMask mask_downscale_max(const DefectMask& mask, int factor) {
    const int H = mask.height(), W = mask.width();
    if (H % factor || W % factor)
        throw InvalidInputError("mask downscale: dims not divisible by factor");
    DefectMask out = DefectMask::zeros(H / factor, W / factor);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
            if (mask.m.at2(i, j) != 0.0f) out.m.at2(i / factor, j / factor) = 1.0f;
    return out;
}

// ------------------------- plain tensor image utils -------------------------

/// Bilinear resample (C,H,W) -> (C,oh,ow), half-pixel centers, clamped edges.
inline Tensor resize_bilinear(const Tensor& src, int oh, int ow) {
    const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
    Tensor out({C, oh, ow});
    const double sy = double(H) / oh, sx = double(W) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(int(std::floor(fy)), 0, H - 1);
        const int y1 = std::min(y0 + 1, H - 1);
        const float wy = static_cast<float>(std::clamp(fy - y0, 0.0, 1.0));
        for (int x = 0; x < ow; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(int(std::floor(fx)), 0, W - 1);
            const int x1 = std::min(x0 + 1, W - 1);
            const float wx = static_cast<float>(std::clamp(fx - x0, 0.0, 1.0));
            for (int c = 0; c < C; ++c) {
                const float a = src.at3(c, y0, x0), bb = src.at3(c, y0, x1);
                const float cc = src.at3(c, y1, x0), d = src.at3(c, y1, x1);
                out.at3(c, y, x) =
                    (1 - wy) * ((1 - wx) * a + wx * bb) + wy * ((1 - wx) * cc + wx * d);
            }
        }
    }
    return out;
}

/// Replicate-pad (C,H,W) on all sides.
inline Tensor pad_replicate(const Tensor& src, int top, int bottom, int left, int right) {
    const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
    Tensor out({C, H + top + bottom, W + left + right});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H + top + bottom; ++y) {
            const int sy = std::clamp(y - top, 0, H - 1);
            for (int x = 0; x < W + left + right; ++x)
                out.at3(c, y, x) = src.at3(c, sy, std::clamp(x - left, 0, W - 1));
        }
    return out;
}

inline Tensor crop(const Tensor& src, int y, int x, int h, int w) {
    const int C = src.dim(0);
    Tensor out({C, h, w});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at3(c, i, j) = src.at3(c, y + i, x + j);
    return out;
}

/// (C,H,W) image -> (1,C,H,W) batch leaf.
inline Var image_batch(const Tensor& img) {
    Tensor t = img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)});
    return make_var(std::move(t), false);
}

inline Tensor batch_to_image(const Tensor& b) {
    return b.reshaped({b.dim(1), b.dim(2), b.dim(3)});
}

}  // namespace albumen
