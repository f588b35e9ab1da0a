#include <catch2/catch_amalgamated.hpp>

#include "albumen/core/autograd.hpp"
#include "albumen/nn/adam.hpp"
#include "albumen/nn/layers.hpp"
#include "support.hpp"

using namespace albumen;
using testsupport::grad_check;

namespace {

Var random_param(std::vector<int> shape, Rng& rng, float std = 0.5f) {
    return make_var(Tensor::randn(std::move(shape), rng, std), true);
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(1);
    Var a = random_param({3, 4}, rng);
    Var b = random_param({3, 4}, rng);
    Var c = random_param({3, 4}, rng, 0.3f);

    auto loss = [&] {
        Var t = add(mul(a, b), scale(tanh_v(c), 0.7f));
        t = sub(t, sigmoid_v(b));
        t = add(t, vexp(scale(a, 0.1f)));
        t = mul(t, t);
        return mean_all(t);
    };
    for (const Var& p : {a, b, c}) {
        auto res = grad_check(loss, p, 12, rng);
        INFO("worst rel " << res.worst_rel);
        CHECK(res.passed == res.tested);
    }
}

TEST_CASE("log/clamp/leaky gradients") {
    Rng rng(2);
    Var a = random_param({2, 5}, rng, 0.4f);
    auto loss = [&] {
        Var p = vclamp(sigmoid_v(a), 1e-7f, 1.0f - 1e-7f);
        Var t = add(neg(vlog(p)), leaky_relu(a, 0.2f));
        return mean_all(t);
    };
    auto res = grad_check(loss, a, 10, rng);
    CHECK(res.passed == res.tested);
}

TEST_CASE("matmul and bias gradients, all transpose combinations") {
    Rng rng(3);
    Var A = random_param({3, 4}, rng);
    Var B = random_param({4, 5}, rng);
    Var bias = random_param({3}, rng);
    for (int mode = 0; mode < 4; ++mode) {
        const bool ta = mode & 1, tb = mode & 2;
        Var A2 = ta ? random_param({4, 3}, rng) : A;
        Var B2 = tb ? random_param({5, 4}, rng) : B;
        auto loss = [&] {
            Var y = matmul(A2, B2, ta, tb);
            y = add_col_bias(y, bias);
            return l1_loss(y, constant(Tensor::zeros({3, 5})));
        };
        for (const Var& p : {A2, B2, bias}) {
            auto res = grad_check(loss, p, 10, rng);
            INFO("mode " << mode << " worst rel " << res.worst_rel);
            CHECK(res.pass_rate() >= 0.95);
        }
    }
}

TEST_CASE("conv2d gradients") {
    Rng rng(4);
    Conv2d conv(3, 4, 3, 1, 1, rng, 0.3f);
    Var x = random_param({2, 3, 5, 5}, rng);
    Var target = constant(Tensor::randn({2, 4, 5, 5}, rng));
    auto loss = [&] { return l1_loss(conv(x), target); };
    for (const Var& p : {x, conv.w, conv.b}) {
        auto res = grad_check(loss, p, 20, rng);
        INFO("worst rel " << res.worst_rel);
        CHECK(res.pass_rate() >= 0.95);
    }
}

TEST_CASE("strided conv and transposed conv are spatial inverses in shape") {
    Rng rng(5);
    Conv2d down(3, 6, 4, 2, 1, rng);
    ConvTranspose2d up(6, 3, 4, 2, 1, rng);
    Var x = make_var(Tensor::randn({1, 3, 8, 8}, rng), false);
    Var mid = down(x);
    REQUIRE(mid->val.shape == std::vector<int>{1, 6, 4, 4});
    Var back = up(mid);
    REQUIRE(back->val.shape == std::vector<int>{1, 3, 8, 8});
}

TEST_CASE("conv_transpose2d gradients") {
    Rng rng(6);
    ConvTranspose2d up(3, 2, 4, 2, 1, rng, 0.3f);
    Var x = random_param({1, 3, 4, 4}, rng);
    Var target = constant(Tensor::randn({1, 2, 8, 8}, rng));
    auto loss = [&] { return l1_loss(up(x), target); };
    for (const Var& p : {x, up.w, up.b}) {
        auto res = grad_check(loss, p, 20, rng);
        CHECK(res.pass_rate() >= 0.95);
    }
}

TEST_CASE("maxpool, concat, channel_norm gradients") {
    Rng rng(7);
    Var x = random_param({2, 3, 4, 4}, rng);
    Var y = random_param({2, 2, 2, 2}, rng);
    Var w = constant(Tensor::randn({2, 5, 2, 2}, rng));
    auto loss = [&] {
        Var pooled = maxpool2d(x);                       // (2,3,2,2)
        Var cat = concat_ch(pooled, y);                  // (2,5,2,2)
        Var normed = channel_norm(cat, 1e-5f);
        return mean_all(mul(normed, w));
    };
    for (const Var& p : {x, y}) {
        auto res = grad_check(loss, p, 16, rng);
        INFO("worst rel " << res.worst_rel);
        CHECK(res.pass_rate() >= 0.95);
    }
}

TEST_CASE("masked softmax rows: values and gradients") {
    Rng rng(8);
    Var logits = random_param({3, 4}, rng);
    Tensor keep({4});
    keep[0] = 1;
    keep[1] = 0;
    keep[2] = 1;
    keep[3] = 1;

    Var s = masked_softmax_rows(logits, keep);
    for (int i = 0; i < 3; ++i) {
        double row = 0.0;
        CHECK(s->val.at2(i, 1) == 0.0f);
        for (int j = 0; j < 4; ++j) row += s->val.at2(i, j);
        CHECK(std::abs(row - 1.0) < 1e-6);
    }

    Var w = constant(Tensor::randn({3, 4}, rng));
    auto loss = [&] { return mean_all(mul(masked_softmax_rows(logits, keep), w)); };
    auto res = grad_check(loss, logits, 12, rng);
    CHECK(res.pass_rate() >= 0.95);

    Tensor none({4});  // all masked: zero rows, zero gradient
    Var s0 = masked_softmax_rows(logits, none);
    for (float v : s0->val.data) CHECK(v == 0.0f);
}

TEST_CASE("two backward passes over a shared graph accumulate only into leaves") {
    Rng rng(9);
    Var w = random_param({2, 2}, rng);
    Var x = constant(Tensor::randn({2, 2}, rng));
    Var h = mul(w, x);
    Var l1 = mean_all(h);
    Var l2 = mean_all(mul(h, h));

    w->zero_grad();
    backward(l1);
    Tensor g1 = w->grad;
    w->zero_grad();
    backward(l2);
    Tensor g2 = w->grad;

    w->zero_grad();
    backward(l1);
    backward(l2);  // shared node h must not double-count
    for (std::int64_t i = 0; i < w->val.numel(); ++i)
        CHECK(std::abs(w->grad[i] - (g1[i] + g2[i])) < 1e-6f);
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(10);
    Var w = random_param({2, 2}, rng);
    Var loss = mean_all(mul(detach(w), w));
    w->zero_grad();
    backward(loss);
    // d/dw of mean(const * w) = const / n
    for (std::int64_t i = 0; i < 4; ++i)
        CHECK(std::abs(w->grad[i] - w->val[i] / 4.0f) < 1e-6f);
}

TEST_CASE("fuse_select routes values and gradients by mask") {
    Rng rng(11);
    Var lo = random_param({1, 2, 2, 2}, rng);
    Var go = random_param({1, 2, 2, 2}, rng);
    Tensor m({2, 2});
    m.at2(0, 1) = 1.0f;
    m.at2(1, 0) = 1.0f;

    Var fused = fuse_select(lo, go, m);
    for (int c = 0; c < 2; ++c) {
        CHECK(fused->val.at4(0, c, 0, 0) == lo->val.at4(0, c, 0, 0));
        CHECK(fused->val.at4(0, c, 0, 1) == go->val.at4(0, c, 0, 1));
        CHECK(fused->val.at4(0, c, 1, 0) == go->val.at4(0, c, 1, 0));
        CHECK(fused->val.at4(0, c, 1, 1) == lo->val.at4(0, c, 1, 1));
    }
    lo->zero_grad();
    go->zero_grad();
    backward(sum_all(fused));
    for (int c = 0; c < 2; ++c) {
        CHECK(lo->grad.at4(0, c, 0, 0) == 1.0f);
        CHECK(lo->grad.at4(0, c, 0, 1) == 0.0f);
        CHECK(go->grad.at4(0, c, 0, 1) == 1.0f);
        CHECK(go->grad.at4(0, c, 0, 0) == 0.0f);
    }
}

TEST_CASE("adam minimizes a quadratic") {
    Rng rng(12);
    Var w = random_param({4}, rng, 2.0f);
    Var target = constant(Tensor::full({4}, 0.37f));
    Adam opt({{"w", w}}, 0.05, 0.5, 0.999);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 300; ++i) {
        opt.zero_grad();
        Var d = sub(w, target);
        Var loss = mean_all(mul(d, d));
        if (i == 0) first = loss->val[0];
        last = loss->val[0];
        backward(loss);
        opt.step();
    }
    CHECK(last < 1e-4);
    CHECK(first > last);
}

TEST_CASE("linear decay schedule holds then decays to zero") {
    CHECK(linear_decay_factor(0, 10) == 1.0);
    CHECK(linear_decay_factor(4, 10) == 1.0);
    CHECK(linear_decay_factor(5, 10) == 1.0);
    CHECK(linear_decay_factor(9, 10) == Catch::Approx(0.2));
    CHECK(linear_decay_factor(10, 10) == 0.0);
}
