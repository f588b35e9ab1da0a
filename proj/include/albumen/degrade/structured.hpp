#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "albumen/core/image.hpp"
#include "albumen/core/rng.hpp"
#include "albumen/degrade/unstructured.hpp"

namespace albumen {

enum class AssetKind { Scratch, Paper };

/// Grayscale scratch or paper texture, unit range.
struct ScratchAsset {
    Tensor texture;  // (1,h,w)
    AssetKind kind = AssetKind::Scratch;

    ScratchAsset() = default;
    ScratchAsset(Tensor t, AssetKind k) : texture(std::move(t)), kind(k) {
        if (texture.ndim() != 3 || texture.dim(0) != 1)
            throw InvalidInputError("scratch asset: texture must be (1,h,w)");
    }
};

enum class BlendMode { Add, LightenOnly, Screen };

/// Similarity placement of a texture into the target image: uniform scale,
/// rotation, and the top-left corner of the rotated bounding box.
struct Placement {
    double scale = 1.0;
    double angle = 0.0;  // radians
    int dx = 0, dy = 0;
};

struct ElasticConfig {
    double disp_std = 8.0;  // pixels
    int smooth_k = 17;      // gaussian kernel size for field smoothing
};

namespace detail {

/// Grid-displacement warp: smoothed Gaussian fields rescaled to `disp_std`.
inline Tensor elastic_distort(const Tensor& tex, const ElasticConfig& cfg, Rng& rng) {
    const int H = tex.dim(1), W = tex.dim(2);
    Tensor fx({1, H, W}), fy({1, H, W});
    for (auto& v : fx.data) v = rng.normalf();
    for (auto& v : fy.data) v = rng.normalf();
    if (cfg.smooth_k >= 3) {
        const auto k = gaussian_kernel_1d(cfg.smooth_k | 1, cfg.smooth_k / 4.0);
        fx = filter_separable(fx, k);
        fy = filter_separable(fy, k);
    }
    auto rescale = [&](Tensor& f) {
        double m = 0.0, v = 0.0;
        for (float x : f.data) m += x;
        m /= double(f.numel());
        for (float x : f.data) v += (x - m) * (x - m);
        v = std::sqrt(v / double(f.numel()));
        const float s = v > 1e-12 ? static_cast<float>(cfg.disp_std / v) : 0.0f;
        for (auto& x : f.data) x = (x - static_cast<float>(m)) * s;
    };
    rescale(fx);
    rescale(fy);

    Tensor out({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double sx = x + fx.at3(0, y, x);
            const double sy = y + fy.at3(0, y, x);
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const double wx = sx - x0, wy = sy - y0;
            auto px = [&](int yy, int xx) -> double {
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) return 0.0;
                return tex.at3(0, yy, xx);
            };
            out.at3(0, y, x) = static_cast<float>(
                (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
                wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1)));
        }
    return out;
}

/// Rotated-bbox size of a scaled (th,tw) texture.
inline std::pair<int, int> placed_bbox(int th, int tw, const Placement& p) {
    const double sw = tw * p.scale, sh = th * p.scale;
    const double ca = std::abs(std::cos(p.angle)), sa = std::abs(std::sin(p.angle));
    return {static_cast<int>(std::ceil(sw * sa + sh * ca)),
            static_cast<int>(std::ceil(sw * ca + sh * sa))};  // (bh, bw)
}

/// Render the texture into an (H,W) alpha canvas under `placement`.
inline Tensor render_texture(const Tensor& tex, int H, int W, const Placement& p) {
    const int th = tex.dim(1), tw = tex.dim(2);
    const auto [bh, bw] = placed_bbox(th, tw, p);
    if (bh > H || bw > W)
        throw InvalidPlacementError("texture larger than image after placement");
    if (p.dx < 0 || p.dy < 0 || p.dx + bw > W || p.dy + bh > H)
        throw InvalidPlacementError("texture placed outside the image");

    Tensor canvas({H, W});
    const double cx = p.dx + bw / 2.0, cy = p.dy + bh / 2.0;
    const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
    for (int y = p.dy; y < p.dy + bh; ++y)
        for (int x = p.dx; x < p.dx + bw; ++x) {
            const double rx = (x + 0.5) - cx, ry = (y + 0.5) - cy;
            const double ux = (ca * rx - sa * ry) / p.scale + tw / 2.0 - 0.5;
            const double uy = (sa * rx + ca * ry) / p.scale + th / 2.0 - 0.5;
            const int x0 = static_cast<int>(std::floor(ux)), y0 = static_cast<int>(std::floor(uy));
            const double wx = ux - x0, wy = uy - y0;
            auto px = [&](int yy, int xx) -> double {
                if (yy < 0 || yy >= th || xx < 0 || xx >= tw) return 0.0;
                return tex.at3(0, yy, xx);
            };
            canvas.at2(y, x) = static_cast<float>(
                (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
                wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1)));
        }
    return canvas;
}

}  // namespace detail

/// Blend one distorted, placed texture over the image. Returns the blended
/// image and the binary mask of pixels whose blended-texture alpha exceeds
/// `mask_threshold`.
inline std::pair<ImageTensor, DefectMask> blend_scratch(
    const ImageTensor& img, const ScratchAsset& asset, BlendMode mode, double opacity,
    const Placement& placement, std::uint64_t seed, const ElasticConfig& elastic = {},
    double mask_threshold = 0.05) {
    detail::require_unit(img, "blend_scratch");
    if (opacity < 0.0 || opacity > 1.0)
        throw InvalidParameterError("blend_scratch: opacity outside [0,1]");

    const int H = img.height(), W = img.width();
    Rng rng(seed);
    const Tensor warped = detail::elastic_distort(asset.texture, elastic, rng);
    const Tensor placed = detail::render_texture(warped, H, W, placement);

    ImageTensor out = img;
    DefectMask mask = DefectMask::zeros(H, W);
    const float op = static_cast<float>(opacity);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float a = placed.at2(y, x) * op;
            if (a > mask_threshold) mask.m.at2(y, x) = 1.0f;
            for (int c = 0; c < img.channels(); ++c) {
                const float v = img.t.at3(c, y, x);
                float r = v;
                switch (mode) {
                    case BlendMode::Add: r = std::min(1.0f, v + a); break;
                    case BlendMode::LightenOnly: r = std::max(v, a); break;
                    case BlendMode::Screen: r = 1.0f - (1.0f - v) * (1.0f - a); break;
                }
                out.t.at3(c, y, x) = r;
            }
        }
    return {std::move(out), std::move(mask)};
}

struct StructuredConfig {
    int min_scratches = 1, max_scratches = 6;
    double hole_prob = 0.3;
    double opacity_lo = 0.6, opacity_hi = 1.0;
    double mask_threshold = 0.05;
    ElasticConfig elastic{};
    int hole_feather = 12;
    bool film_grain = true;
    bool random_blur = true;
    double grain_sigma_lo = 3.0, grain_sigma_hi = 15.0;
    double blur_sigma_lo = 1.0, blur_sigma_hi = 2.0;
};

namespace detail {

/// Irregular star-shaped hole with a linear feather ramp across the boundary.
inline Tensor hole_alpha(int H, int W, Rng& rng, int feather) {
    constexpr int kSpokes = 12;
    const double rbase = rng.uniform(0.10, 0.22) * std::min(H, W);
    const double cx = rng.uniform(0.3, 0.7) * W;
    const double cy = rng.uniform(0.3, 0.7) * H;
    std::array<double, kSpokes> radii;
    for (auto& r : radii) r = rbase * rng.uniform(0.55, 1.45);

    Tensor alpha({H, W});
    const double f = std::max(1, feather);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double dist = std::sqrt(dx * dx + dy * dy);
            double ang = std::atan2(dy, dx);
            if (ang < 0) ang += 2.0 * M_PI;
            const double t = ang / (2.0 * M_PI) * kSpokes;
            const int i0 = static_cast<int>(t) % kSpokes, i1 = (i0 + 1) % kSpokes;
            const double w = t - std::floor(t);
            const double rb = (1 - w) * radii[static_cast<std::size_t>(i0)] +
                              w * radii[static_cast<std::size_t>(i1)];
            alpha.at2(y, x) =
                static_cast<float>(std::clamp((rb - dist) / f + 0.5, 0.0, 1.0));
        }
    return alpha;
}

}  // namespace detail

/// Structured degradation per one seed: 1..N scratch blends, optionally one
/// feathered hole revealing paper texture, then global film grain and blur.
/// The returned mask is the union of scratch and hole masks; grain/blur are
/// excluded from it.
inline std::pair<ImageTensor, DefectMask> synthesize_structured(
    const ImageTensor& img, const std::vector<ScratchAsset>& assets, std::uint64_t seed,
    const StructuredConfig& cfg = {}) {
    detail::require_unit(img, "synthesize_structured");
    std::vector<const ScratchAsset*> scratches, papers;
    for (const auto& a : assets)
        (a.kind == AssetKind::Scratch ? scratches : papers).push_back(&a);
    if (scratches.empty() || papers.empty())
        throw ConfigurationError("structured synthesis needs scratch and paper assets");

    const int H = img.height(), W = img.width();
    Rng rng(seed);
    ImageTensor cur = img;
    DefectMask mask = DefectMask::zeros(H, W);

    const int n = cfg.max_scratches >= cfg.min_scratches
                      ? rng.uniform_int(cfg.min_scratches, cfg.max_scratches)
                      : 0;
    for (int i = 0; i < n; ++i) {
        const auto& asset =
            *scratches[static_cast<std::size_t>(rng.uniform_int(0, int(scratches.size()) - 1))];
        const int th = asset.texture.dim(1), tw = asset.texture.dim(2);
        Placement p;
        p.angle = rng.uniform(0.0, 2.0 * M_PI);
        const double ca = std::abs(std::cos(p.angle)), sa = std::abs(std::sin(p.angle));
        const double smax =
            std::min(double(W) / (tw * ca + th * sa), double(H) / (tw * sa + th * ca)) * 0.98;
        p.scale = rng.uniform(std::min(0.4, smax * 0.5), std::min(1.4, smax));
        const auto [bh, bw] = detail::placed_bbox(th, tw, p);
        p.dx = rng.uniform_int(0, std::max(0, W - bw));
        p.dy = rng.uniform_int(0, std::max(0, H - bh));
        const auto mode = static_cast<BlendMode>(rng.uniform_int(0, 2));
        const double opacity = rng.uniform(cfg.opacity_lo, cfg.opacity_hi);
        auto [blended, m] = blend_scratch(cur, asset, mode, opacity, p, rng.next_u64(),
                                          cfg.elastic, cfg.mask_threshold);
        cur = std::move(blended);
        mask = mask_union(mask, m);
    }

    if (rng.bernoulli(cfg.hole_prob)) {
        const Tensor alpha = detail::hole_alpha(H, W, rng, cfg.hole_feather);
        const auto& paper =
            *papers[static_cast<std::size_t>(rng.uniform_int(0, int(papers.size()) - 1))];
        const Tensor sheet = resize_bilinear(paper.texture, H, W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const float a = alpha.at2(y, x);
                if (a > cfg.mask_threshold) mask.m.at2(y, x) = 1.0f;
                for (int c = 0; c < cur.channels(); ++c)
                    cur.t.at3(c, y, x) =
                        (1.0f - a) * cur.t.at3(c, y, x) + a * sheet.at3(0, y, x);
            }
    }

    if (cfg.film_grain)
        cur = apply_gaussian_noise(cur, rng.uniform(cfg.grain_sigma_lo, cfg.grain_sigma_hi),
                                   rng.next_u64());
    if (cfg.random_blur) {
        const int k = rng.bernoulli(0.5) ? 3 : 5;
        cur = apply_gaussian_blur(cur, k, rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi));
    }
    return {std::move(cur), std::move(mask)};
}

// ------------------------ procedural texture assets ------------------------

/// Thin bright strokes on black; stands in for scanned scratch textures.
inline ScratchAsset make_procedural_scratch(std::uint64_t seed, int h = 160, int w = 160) {
    Rng rng(seed);
    Tensor tex({1, h, w});
    const int strokes = rng.uniform_int(1, 3);
    for (int s = 0; s < strokes; ++s) {
        double x = rng.uniform(0.1, 0.9) * w;
        double y = rng.uniform(0.0, 0.15) * h;
        double dir = rng.uniform(-0.35, 0.35) + M_PI / 2.0;  // mostly downward
        const double width = rng.uniform(0.6, 1.6);
        const double bright = rng.uniform(0.7, 1.0);
        const int steps = static_cast<int>(h * 1.5);
        for (int i = 0; i < steps; ++i) {
            dir += rng.uniform(-0.08, 0.08);
            x += std::cos(dir);
            y += std::sin(dir);
            if (x < 1 || x >= w - 1 || y < 1 || y >= h - 1) break;
            const int r = static_cast<int>(std::ceil(2.0 * width));
            for (int oy = -r; oy <= r; ++oy)
                for (int ox = -r; ox <= r; ++ox) {
                    const int px = static_cast<int>(x) + ox, py = static_cast<int>(y) + oy;
                    if (px < 0 || px >= w || py < 0 || py >= h) continue;
                    const double d2 = (px + 0.5 - x) * (px + 0.5 - x) +
                                      (py + 0.5 - y) * (py + 0.5 - y);
                    const float v =
                        static_cast<float>(bright * std::exp(-d2 / (2.0 * width * width)));
                    tex.at3(0, py, px) = std::max(tex.at3(0, py, px), v);
                }
        }
    }
    return ScratchAsset(std::move(tex), AssetKind::Scratch);
}

/// Low-frequency mottled sheet; stands in for scanned paper textures.
inline ScratchAsset make_procedural_paper(std::uint64_t seed, int h = 128, int w = 128) {
    Rng rng(seed);
    Tensor noise({1, h, w});
    for (auto& v : noise.data) v = rng.normalf();
    noise = detail::filter_separable(noise, detail::gaussian_kernel_1d(13, 3.0));
    const float base = rng.uniformf(0.55f, 0.8f);
    const float gx = rng.uniformf(-0.1f, 0.1f), gy = rng.uniformf(-0.1f, 0.1f);
    Tensor tex({1, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            tex.at3(0, y, x) = std::clamp(
                base + 0.6f * noise.at3(0, y, x) + gx * (x / float(w) - 0.5f) +
                    gy * (y / float(h) - 0.5f),
                0.0f, 1.0f);
    return ScratchAsset(std::move(tex), AssetKind::Paper);
}

}  // namespace albumen
