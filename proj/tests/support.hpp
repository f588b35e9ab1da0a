#pragma once

// Shared test helpers: finite-difference gradient checking and procedural
// toy data for smoke-training runs.

#include <cmath>
#include <functional>

#include "albumen/core/autograd.hpp"
#include "albumen/core/image.hpp"
#include "albumen/core/rng.hpp"

namespace testsupport {

using albumen::ImageTensor;
using albumen::Range;
using albumen::Rng;
using albumen::Tensor;
using albumen::Var;

struct GradCheckResult {
    int tested = 0;
    int passed = 0;
    double worst_rel = 0.0;
    double pass_rate() const { return tested ? double(passed) / tested : 1.0; }
};

/// Central finite differences on sampled coordinates of `param` against the
/// analytic gradient of the scalar loss built by `make_loss` (the closure
/// must rebuild the graph on every call). `abs_floor` absorbs float32
/// measurement noise on near-zero gradients; pass 0 for strict runs.
inline GradCheckResult grad_check(const std::function<Var()>& make_loss, const Var& param,
                                  int max_coords, Rng& rng, double h = 1e-3,
                                  double rel_tol = 2e-2, double abs_floor = 5e-4) {
    param->zero_grad();
    Var loss = make_loss();
    albumen::backward(loss);
    Tensor analytic = param->grad;

    GradCheckResult res;
    const std::int64_t n = param->val.numel();
    const int count = static_cast<int>(std::min<std::int64_t>(n, max_coords));
    for (int t = 0; t < count; ++t) {
        const std::int64_t idx =
            count == n ? t : static_cast<std::int64_t>(rng.uniform() * double(n));
        const float keep = param->val[idx];
        param->val[idx] = keep + static_cast<float>(h);
        const double fp = make_loss()->val[0];
        param->val[idx] = keep - static_cast<float>(h);
        const double fm = make_loss()->val[0];
        param->val[idx] = keep;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[idx];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        const double rel = std::abs(a - numeric) / denom;
        ++res.tested;
        if (rel <= rel_tol || std::abs(a - numeric) <= abs_floor) ++res.passed;
        res.worst_rel = std::max(res.worst_rel, rel);
    }
    return res;
}

/// Smooth gradient background with a few random rectangles and discs.
/// Deterministic per seed; restoration-friendly toy content.
inline ImageTensor make_toy_image(std::uint64_t seed, int h, int w) {
    Rng rng(seed);
    Tensor t({3, h, w});
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniformf(0.15f, 0.85f);
        c1[c] = rng.uniformf(0.15f, 0.85f);
    }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float u = 0.5f * (float(y) / h + float(x) / w);
                t.at3(c, y, x) = (1 - u) * c0[c] + u * c1[c];
            }
    const int shapes = rng.uniform_int(3, 6);
    for (int s = 0; s < shapes; ++s) {
        float col[3];
        for (auto& v : col) v = rng.uniformf(0.05f, 0.95f);
        if (rng.bernoulli(0.5)) {
            const int rw = rng.uniform_int(w / 8, w / 2), rh = rng.uniform_int(h / 8, h / 2);
            const int x0 = rng.uniform_int(0, w - rw), y0 = rng.uniform_int(0, h - rh);
            for (int c = 0; c < 3; ++c)
                for (int y = y0; y < y0 + rh; ++y)
                    for (int x = x0; x < x0 + rw; ++x) t.at3(c, y, x) = col[c];
        } else {
            const int r = rng.uniform_int(std::min(h, w) / 10, std::min(h, w) / 4);
            const int cx = rng.uniform_int(r, w - 1 - r), cy = rng.uniform_int(r, h - 1 - r);
            for (int c = 0; c < 3; ++c)
                for (int y = cy - r; y <= cy + r; ++y)
                    for (int x = cx - r; x <= cx + r; ++x)
                        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                            t.at3(c, y, x) = col[c];
        }
    }
    return ImageTensor(std::move(t), Range::Unit);
}

/// Ellipse "portrait" on a gradient background: skin oval, eyes, mouth.
inline ImageTensor make_toy_face(std::uint64_t seed, int size) {
    Rng rng(seed);
    Tensor t({3, size, size});
    const float bg = rng.uniformf(0.2f, 0.7f);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                t.at3(c, y, x) = bg * (0.7f + 0.3f * float(y) / size);

    const float skin[3] = {rng.uniformf(0.7f, 0.9f), rng.uniformf(0.5f, 0.7f),
                           rng.uniformf(0.4f, 0.6f)};
    const float cx = size * rng.uniformf(0.45f, 0.55f), cy = size * rng.uniformf(0.45f, 0.55f);
    const float ax = size * rng.uniformf(0.26f, 0.34f), ay = size * rng.uniformf(0.32f, 0.42f);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float ex = (x - cx) / ax, ey = (y - cy) / ay;
            if (ex * ex + ey * ey <= 1.0f)
                for (int c = 0; c < 3; ++c) t.at3(c, y, x) = skin[c];
        }
    const int er = std::max(1, int(size * 0.05f));
    for (int side = -1; side <= 1; side += 2) {
        const int ex = int(cx + side * ax * 0.45f), ey = int(cy - ay * 0.25f);
        for (int y = ey - er; y <= ey + er; ++y)
            for (int x = ex - er; x <= ex + er; ++x)
                if (y >= 0 && y < size && x >= 0 && x < size &&
                    (x - ex) * (x - ex) + (y - ey) * (y - ey) <= er * er)
                    for (int c = 0; c < 3; ++c) t.at3(c, y, x) = 0.08f;
    }
    const int my = int(cy + ay * 0.45f), mw = int(ax * 0.5f);
    for (int y = my - er / 2; y <= my + er / 2; ++y)
        for (int x = int(cx) - mw; x <= int(cx) + mw; ++x)
            if (y >= 0 && y < size && x >= 0 && x < size) {
                t.at3(0, y, x) = 0.6f;
                t.at3(1, y, x) = 0.15f;
                t.at3(2, y, x) = 0.2f;
            }
    return ImageTensor(std::move(t), Range::Unit);
}

}  // namespace testsupport
