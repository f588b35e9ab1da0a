#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "albumen/degrade/recipe.hpp"
#include "albumen/degrade/structured.hpp"
#include "albumen/degrade/unstructured.hpp"
#include "support.hpp"

using namespace albumen;
using testsupport::make_toy_image;

namespace {

ImageTensor constant_image(float v, int h = 16, int w = 16, int c = 3) {
    return ImageTensor(Tensor::full({c, h, w}, v), Range::Unit);
}

}  // namespace

TEST_CASE("gaussian noise: zero sigma is the identity") {
    const auto img = make_toy_image(3, 24, 24);
    const auto out = apply_gaussian_noise(img, 0.0, 99);
    CHECK(out.t.data == img.t.data);
}

TEST_CASE("gaussian noise: deterministic for a fixed seed") {
    const auto img = make_toy_image(4, 24, 24);
    const auto a = apply_gaussian_noise(img, 25.0, 7);
    const auto b = apply_gaussian_noise(img, 25.0, 7);
    CHECK(a.t.data == b.t.data);
    const auto c = apply_gaussian_noise(img, 25.0, 8);
    CHECK(a.t.data != c.t.data);
}

TEST_CASE("gaussian noise: sample std matches sigma/255 within 5%") {
    const auto img = constant_image(0.5f, 256, 256, 1);
    const auto out = apply_gaussian_noise(img, 25.0, 2024);
    double m = 0.0;
    for (std::size_t i = 0; i < out.t.data.size(); ++i) m += out.t.data[i] - img.t.data[i];
    m /= double(out.t.numel());
    double var = 0.0;
    for (std::size_t i = 0; i < out.t.data.size(); ++i) {
        const double d = out.t.data[i] - img.t.data[i] - m;
        var += d * d;
    }
    const double stddev = std::sqrt(var / double(out.t.numel()));
    CHECK(stddev == Catch::Approx(25.0 / 255.0).epsilon(0.05));
}

TEST_CASE("gaussian noise: negative sigma rejected") {
    CHECK_THROWS_AS(apply_gaussian_noise(constant_image(0.5f), -1.0, 0), InvalidParameterError);
}

TEST_CASE("gaussian blur: preserves constants, rejects bad kernels") {
    const auto img = constant_image(0.4f);
    const auto out = apply_gaussian_blur(img, 5, 2.0);
    for (std::size_t i = 0; i < out.t.data.size(); ++i)
        CHECK(std::abs(out.t.data[i] - 0.4f) < 1e-6f);
    CHECK_THROWS_AS(apply_gaussian_blur(img, 4, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(apply_gaussian_blur(img, 9, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(apply_gaussian_blur(img, 3, 0.0), InvalidParameterError);
}

TEST_CASE("gaussian blur: impulse response equals the analytic kernel") {
    const int n = 9;
    ImageTensor img(Tensor::zeros({1, n, n}), Range::Unit);
    img.t.at3(0, 4, 4) = 1.0f;
    const double sigma = 1.3;
    const auto out = apply_gaussian_blur(img, 3, sigma);

    // Independent 2-D kernel: separable product of the 1-D weights.
    double w1[3], sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double d = i - 1;
        w1[i] = std::exp(-d * d / (2 * sigma * sigma));
        sum += w1[i];
    }
    for (auto& v : w1) v /= sum;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(out.t.at3(0, 3 + i, 3 + j) == Catch::Approx(w1[i] * w1[j]).margin(1e-6));

    double total = 0.0;
    for (float v : out.t.data) total += v;
    CHECK(total == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("jpeg: near-lossless at quality 100, deterministic, in range") {
    const auto img = constant_image(0.5f, 32, 32);
    const auto out = apply_jpeg(img, 100);
    CHECK(max_abs_diff(out.t, img.t) <= 2.0 / 255.0 + 1e-9);

    const auto toy = make_toy_image(11, 48, 48);
    const auto a = apply_jpeg(toy, 40);
    const auto b = apply_jpeg(toy, 40);
    CHECK(a.t.data == b.t.data);
    CHECK(tensor_min(a.t) >= 0.0f);
    CHECK(tensor_max(a.t) <= 1.0f);
    CHECK_THROWS_AS(apply_jpeg(toy, 0), InvalidParameterError);
}

TEST_CASE("color jitter: shift arithmetic and clamping") {
    const auto img = constant_image(0.5f);
    const auto same = apply_color_jitter(img, {0, 0, 0});
    CHECK(same.t.data == img.t.data);

    const auto out = apply_color_jitter(img, {20, -20, 0});
    CHECK(out.t.at3(0, 3, 3) == Catch::Approx(0.5 + 20.0 / 255.0).margin(1e-6));
    CHECK(out.t.at3(1, 3, 3) == Catch::Approx(0.5 - 20.0 / 255.0).margin(1e-6));
    CHECK(out.t.at3(2, 3, 3) == 0.5f);

    const auto sat = apply_color_jitter(constant_image(1.0f), {20, 0, 0});
    CHECK(sat.t.at3(0, 0, 0) == 1.0f);

    ImageTensor gray(Tensor::full({1, 4, 4}, 0.5f), Range::Unit);
    CHECK_THROWS_AS(apply_color_jitter(gray, {1, 1, 1}), InvalidInputError);
}

TEST_CASE("box blur: constants, center mean, impulse sum") {
    const auto img = constant_image(0.7f);
    const auto out = apply_box_blur(img, 3);
    for (float v : out.t.data) CHECK(std::abs(v - 0.7f) < 1e-6f);

    ImageTensor tiny(Tensor::zeros({1, 3, 3}), Range::Unit);
    float acc = 0.0f;
    for (int i = 0; i < 9; ++i) {
        tiny.t.data[static_cast<std::size_t>(i)] = 0.1f * float(i);
        acc += 0.1f * float(i);
    }
    const auto m = apply_box_blur(tiny, 3);
    CHECK(m.t.at3(0, 1, 1) == Catch::Approx(acc / 9.0f).margin(1e-6));

    ImageTensor imp(Tensor::zeros({1, 11, 11}), Range::Unit);
    imp.t.at3(0, 5, 5) = 1.0f;
    const auto r = apply_box_blur(imp, 5);
    double total = 0.0;
    for (float v : r.t.data) total += v;
    CHECK(total == Catch::Approx(1.0).margin(1e-6));

    CHECK_THROWS_AS(apply_box_blur(img, 2), InvalidParameterError);
    CHECK_THROWS_AS(apply_box_blur(img, 1), InvalidParameterError);
}

TEST_CASE("make_recipe: determinism, inclusion rate, parameter ranges") {
    const auto a = make_recipe(42);
    const auto b = make_recipe(42);
    CHECK(serialize_recipe(a) == serialize_recipe(b));

    const int trials = 10000;
    int counts[5] = {0, 0, 0, 0, 0};
    for (int s = 0; s < trials; ++s) {
        const auto r = make_recipe(static_cast<std::uint64_t>(s));
        for (const auto& op : r.ops) {
            counts[static_cast<int>(op.kind)]++;
            switch (op.kind) {
                case OpKind::GaussianNoise:
                    REQUIRE(op.sigma > 5.0);
                    REQUIRE(op.sigma < 50.0);
                    break;
                case OpKind::GaussianBlur:
                    REQUIRE((op.k == 3 || op.k == 5 || op.k == 7));
                    REQUIRE(op.sigma > 1.0);
                    REQUIRE(op.sigma < 5.0);
                    break;
                case OpKind::Jpeg:
                    REQUIRE(op.quality > 40);
                    REQUIRE(op.quality < 100);
                    break;
                case OpKind::ColorJitter:
                    for (double sft : op.shifts) {
                        REQUIRE(sft > -20.0);
                        REQUIRE(sft < 20.0);
                    }
                    break;
                case OpKind::BoxBlur:
                    REQUIRE((op.k == 3 || op.k == 5 || op.k == 7));
                    break;
            }
        }
    }
    for (int i = 0; i < 5; ++i) {
        const double rate = double(counts[i]) / trials;
        INFO("op " << i << " rate " << rate);
        CHECK(rate >= 0.67);
        CHECK(rate <= 0.73);
    }
}

TEST_CASE("recipe text round trip") {
    const auto r = make_recipe(7);
    const auto parsed = parse_recipe(serialize_recipe(r));
    CHECK(serialize_recipe(parsed) == serialize_recipe(r));
    CHECK(parsed.seed == 7);
}

TEST_CASE("synthesize_unstructured: identity cases and determinism") {
    const auto img = make_toy_image(5, 32, 32);

    DegradationRecipe empty;
    empty.seed = 1;
    CHECK(synthesize_unstructured(img, empty).t.data == img.t.data);

    DegradationRecipe zero_noise;
    zero_noise.seed = 2;
    DegradationOp op;
    op.kind = OpKind::GaussianNoise;
    op.sigma = 0.0;
    zero_noise.ops.push_back(op);
    CHECK(synthesize_unstructured(img, zero_noise).t.data == img.t.data);

    const auto recipe = make_recipe(1234);
    const auto a = synthesize_unstructured(img, recipe);
    const auto b = synthesize_unstructured(img, recipe);
    CHECK(tensor_fnv1a(a.t) == tensor_fnv1a(b.t));
}

TEST_CASE("blend_scratch: opacity zero, lighten-only, screen formula") {
    const auto img = constant_image(0.5f, 24, 24);
    ScratchAsset tex(Tensor::full({1, 8, 8}, 0.5f), AssetKind::Scratch);
    Placement p;
    p.dx = 4;
    p.dy = 4;
    const ElasticConfig rigid{0.0, 0};

    auto [out0, m0] = blend_scratch(img, tex, BlendMode::Add, 0.0, p, 1, rigid);
    CHECK(out0.t.data == img.t.data);
    CHECK(m0.positive_count() == 0);

    // Texture darker than the image everywhere: lighten-only is a no-op.
    ScratchAsset dark(Tensor::full({1, 8, 8}, 0.2f), AssetKind::Scratch);
    auto [outl, ml] = blend_scratch(img, dark, BlendMode::LightenOnly, 1.0, p, 1, rigid);
    CHECK(outl.t.data == img.t.data);
    CHECK(ml.positive_count() == 64);  // alpha 0.2 still exceeds the mask threshold

    auto [outs, ms] = blend_scratch(img, tex, BlendMode::Screen, 1.0, p, 1, rigid);
    CHECK(outs.t.at3(0, 8, 8) == Catch::Approx(0.75).margin(1e-6));
    CHECK(outs.t.at3(0, 0, 0) == 0.5f);  // outside placement untouched
    CHECK(ms.m.at2(8, 8) == 1.0f);
    CHECK(ms.m.at2(0, 0) == 0.0f);

    Placement bad;
    bad.scale = 8.0;
    CHECK_THROWS_AS(blend_scratch(img, tex, BlendMode::Add, 1.0, bad, 1, rigid),
                    InvalidPlacementError);
    CHECK_THROWS_AS(blend_scratch(img, tex, BlendMode::Add, 1.5, p, 1, rigid),
                    InvalidParameterError);
}

TEST_CASE("synthesize_structured: config edges, determinism, binary mask") {
    const auto img = make_toy_image(6, 48, 48);
    std::vector<ScratchAsset> assets{make_procedural_scratch(1), make_procedural_paper(2)};

    StructuredConfig none;
    none.min_scratches = none.max_scratches = 0;
    none.hole_prob = 0.0;
    none.film_grain = false;
    none.random_blur = false;
    auto [plain, zero_mask] = synthesize_structured(img, assets, 9, none);
    CHECK(plain.t.data == img.t.data);
    CHECK(zero_mask.positive_count() == 0);

    StructuredConfig cfg;
    auto [a, am] = synthesize_structured(img, assets, 77, cfg);
    auto [b, bm] = synthesize_structured(img, assets, 77, cfg);
    CHECK(a.t.data == b.t.data);
    CHECK(am.m.data == bm.m.data);
    am.validate();
    CHECK(am.positive_count() > 0);

    CHECK_THROWS_AS(synthesize_structured(img, {}, 1, cfg), ConfigurationError);
    std::vector<ScratchAsset> only_scratch{make_procedural_scratch(1)};
    CHECK_THROWS_AS(synthesize_structured(img, only_scratch, 1, cfg), ConfigurationError);
}

TEST_CASE("mask union is pixelwise OR") {
    DefectMask a = DefectMask::zeros(2, 2), b = DefectMask::zeros(2, 2);
    a.m.at2(0, 0) = 1;
    b.m.at2(1, 1) = 1;
    const auto u = mask_union(a, b);
    CHECK(u.m.at2(0, 0) == 1.0f);
    CHECK(u.m.at2(1, 1) == 1.0f);
    CHECK(u.m.at2(0, 1) == 0.0f);
    CHECK(u.positive_count() == 2);
}
