#include <gtest/gtest.h>

#include <cmath>

#include "hdrgan/autograd.hpp"
#include "hdrgan/error.hpp"
#include "hdrgan/nn.hpp"
#include "hdrgan/rng.hpp"
#include "test_util.hpp"

using namespace hdrgan;
using namespace hdrgan::ag;
using testutil::check_gradient;
using testutil::random_tensor;

namespace {

constexpr double kTol = 1e-6;

// Weighted sum with fixed random weights so every output element matters.
Var probe(const Var& y, std::uint64_t seed = 99) {
    return sum(mul(y, constant(random_tensor(y.shape(), seed, -1.0, 1.0))));
}

// Direct zero-padded convolution loop.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
    const int k = w.shape.h;
    const int oh = (x.shape.h + 2 * pad - k) / stride + 1, ow = (x.shape.w + 2 * pad - k) / stride + 1;
    Tensor y({x.shape.n, w.shape.n, oh, ow});
    for (int n = 0; n < x.shape.n; ++n)
        for (int o = 0; o < w.shape.n; ++o)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    double acc = b ? b->data[o] : 0.0;
                    for (int c = 0; c < x.shape.c; ++c)
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v) {
                                const int yy = i * stride - pad + u, xx = j * stride - pad + v;
                                if (yy < 0 || xx < 0 || yy >= x.shape.h || xx >= x.shape.w) continue;
                                acc += w.at(o, c, u, v) * x.at(n, c, yy, xx);
                            }
                    y.at(n, o, i, j) = acc;
                }
    return y;
}

}  // namespace

TEST(Conv2d, ForwardMatchesLoopOracle) {
    struct Geo {
        int k, stride, pad, h, w;
    };
    for (Geo g : {Geo{3, 1, 1, 6, 5}, Geo{4, 2, 1, 8, 8}, Geo{1, 1, 0, 3, 4}, Geo{4, 1, 1, 5, 7}}) {
        const Tensor x = random_tensor({2, 3, g.h, g.w}, 1, -1, 1);
        const Tensor w = random_tensor({4, 3, g.k, g.k}, 2, -1, 1);
        const Tensor b = random_tensor({1, 4, 1, 1}, 3, -1, 1);
        const Tensor got = conv2d(constant(x), constant(w), constant(b), g.stride, g.pad).value();
        const Tensor ref = conv_oracle(x, w, &b, g.stride, g.pad);
        ASSERT_EQ(got.shape, ref.shape);
        for (std::size_t i = 0; i < ref.numel(); ++i) EXPECT_NEAR(got.data[i], ref.data[i], 1e-12);
    }
}

TEST(Conv2d, GradientsOfInputWeightAndBias) {
    const Tensor x = random_tensor({1, 2, 5, 6}, 4, -1, 1);
    const Tensor w = random_tensor({3, 2, 3, 3}, 5, -1, 1);
    const Tensor b = random_tensor({1, 3, 1, 1}, 6, -1, 1);
    for (int stride : {1, 2}) {
        EXPECT_LT(check_gradient([&](const Var& v) { return probe(conv2d(v, constant(w), constant(b), stride, 1)); }, x)
                      .rel_error,
                  kTol);
        EXPECT_LT(check_gradient([&](const Var& v) { return probe(conv2d(constant(x), v, constant(b), stride, 1)); }, w)
                      .rel_error,
                  kTol);
        EXPECT_LT(check_gradient([&](const Var& v) { return probe(conv2d(constant(x), constant(w), v, stride, 1)); }, b)
                      .rel_error,
                  kTol);
    }
}

TEST(Elementwise, Gradients) {
    const Shape s{2, 3, 3, 2};
    const Tensor a = random_tensor(s, 7, -2, 2), b = random_tensor(s, 8, -2, 2);
    const auto cb = constant(b);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(add(v, cb)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(sub(cb, v)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(mul(v, cb)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(mul(v, v)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(scale(v, -3.5)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(add_scalar(v, 2.0)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(sigmoid(v)); }, a).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(softplus(v)); }, a).rel_error, kTol);
    // away from the kinks
    Tensor off = a;
    for (auto& x : off.data) x += x >= 0 ? 0.1 : -0.1;
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(relu(v)); }, off).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(leaky_relu(v, 0.2)); }, off).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(abs(v)); }, off).rel_error, kTol);
}

TEST(Elementwise, ForwardValues) {
    const Var x = constant(Tensor({1, 1, 1, 4}, {-2.0, -0.5, 0.0, 3.0}));
    EXPECT_EQ(relu(x).value().data, (std::vector<double>{0, 0, 0, 3}));
    EXPECT_EQ(leaky_relu(x, 0.2).value().data, (std::vector<double>{-0.4, -0.1, 0, 3}));
    EXPECT_EQ(abs(x).value().data, (std::vector<double>{2, 0.5, 0, 3}));
    EXPECT_DOUBLE_EQ(sigmoid(x).value().data[2], 0.5);
    EXPECT_NEAR(softplus(x).value().data[3], std::log1p(std::exp(3.0)), 1e-15);
    // large arguments stay finite
    const Var big = constant(Tensor({1, 1, 1, 2}, {-800.0, 800.0}));
    EXPECT_NEAR(softplus(big).value().data[1], 800.0, 1e-12);
    EXPECT_EQ(sigmoid(big).value().data[0], 0.0);
}

TEST(Spatial, MulSpatialBlendAndConcat) {
    const Tensor x = random_tensor({2, 3, 4, 4}, 9, -1, 1);
    const Tensor s = random_tensor({2, 1, 4, 4}, 10, -1, 1);
    const Tensor y = random_tensor({2, 3, 4, 4}, 11, -1, 1);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(mul_spatial(v, constant(s))); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(mul_spatial(constant(x), v)); }, s).rel_error, kTol);
    const Tensor alpha = random_tensor({2, 1, 4, 4}, 12);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(blend(v, constant(y), alpha)); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(blend(constant(y), v, alpha)); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(concat_channels(v, constant(s))); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([&](const Var& v) { return probe(concat_channels(constant(x), v)); }, s).rel_error, kTol);

    const Tensor c = concat_channels(constant(x), constant(s)).value();
    ASSERT_EQ(c.shape, (Shape{2, 4, 4, 4}));
    EXPECT_EQ(c.at(1, 3, 2, 1), s.at(1, 0, 2, 1));
    EXPECT_EQ(c.at(1, 2, 2, 1), x.at(1, 2, 2, 1));
}

TEST(Spatial, BlendSelectsExactlyAtBinaryAlpha) {
    const Tensor a = random_tensor({1, 3, 2, 2}, 1), b = random_tensor({1, 3, 2, 2}, 2);
    const Tensor alpha({1, 1, 2, 2}, {1, 0, 0, 1});
    const Tensor out = blend(constant(a), constant(b), alpha).value();
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(out.at(0, c, 0, 0), a.at(0, c, 0, 0));
        EXPECT_EQ(out.at(0, c, 0, 1), b.at(0, c, 0, 1));
        EXPECT_EQ(out.at(0, c, 1, 1), a.at(0, c, 1, 1));
    }
}

TEST(Spatial, ResamplingForwardAndGradients) {
    const Tensor x = random_tensor({1, 2, 4, 6}, 13, -1, 1);
    const Tensor up = upsample_nearest(constant(x), 2).value();
    ASSERT_EQ(up.shape, (Shape{1, 2, 8, 12}));
    EXPECT_EQ(up.at(0, 1, 5, 7), x.at(0, 1, 2, 3));
    const Tensor dn = avg_pool2(constant(x)).value();
    ASSERT_EQ(dn.shape, (Shape{1, 2, 2, 3}));
    EXPECT_NEAR(dn.at(0, 0, 1, 2), 0.25 * (x.at(0, 0, 2, 4) + x.at(0, 0, 2, 5) + x.at(0, 0, 3, 4) + x.at(0, 0, 3, 5)),
                1e-15);
    EXPECT_LT(check_gradient([](const Var& v) { return probe(upsample_nearest(v, 2)); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([](const Var& v) { return probe(avg_pool2(v)); }, x).rel_error, kTol);
}

TEST(InstanceNorm, ZeroMeanUnitVarianceAndGradient) {
    const Tensor x = random_tensor({2, 3, 5, 4}, 14, -3, 5);
    const Tensor y = instance_norm(constant(x)).value();
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c) {
            double m = 0, v = 0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 4; ++j) m += y.at(n, c, i, j);
            m /= 20;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 4; ++j) v += (y.at(n, c, i, j) - m) * (y.at(n, c, i, j) - m);
            EXPECT_NEAR(m, 0.0, 1e-12);
            EXPECT_NEAR(v / 20, 1.0, 1e-3);
        }
    EXPECT_LT(check_gradient([](const Var& v) { return probe(instance_norm(v)); }, x).rel_error, 1e-5);
}

TEST(Reductions, ValuesAndGradients) {
    const Tensor x = random_tensor({1, 2, 3, 3}, 15, -1, 1);
    double s = 0, ss = 0;
    for (double v : x.data) s += v, ss += v * v;
    EXPECT_NEAR(sum(constant(x)).item(), s, 1e-12);
    EXPECT_NEAR(mean(constant(x)).item(), s / 18, 1e-12);
    EXPECT_NEAR(l2_norm(constant(x)).item(), std::sqrt(ss), 1e-12);
    EXPECT_LT(check_gradient([](const Var& v) { return mean(mul(v, v)); }, x).rel_error, kTol);
    EXPECT_LT(check_gradient([](const Var& v) { return l2_norm(v); }, x).rel_error, kTol);
    // zero vector: gradient defined as zero
    Var z = parameter(Tensor({1, 1, 1, 3}));
    backward(l2_norm(z));
    for (double g : z.grad().data) EXPECT_EQ(g, 0.0);
}

TEST(MuTonemap, ValuesGradientAndDomain) {
    const Tensor x = random_tensor({1, 3, 2, 2}, 16, 0.01, 2.0);
    const Tensor y = mu_tonemap(constant(x), 5000.0).value();
    for (std::size_t i = 0; i < x.numel(); ++i)
        EXPECT_NEAR(y.data[i], std::log1p(5000.0 * x.data[i]) / std::log1p(5000.0), 1e-15);
    EXPECT_LT(check_gradient([](const Var& v) { return probe(mu_tonemap(v, 5000.0)); }, x, 1e-8).rel_error, 1e-5);
    EXPECT_THROW(mu_tonemap(constant(Tensor({1, 1, 1, 1}, {-0.5})), 5000.0), DomainError);
}

TEST(Bce, MatchesScalarFormulaAndGradient) {
    const Tensor l = random_tensor({1, 1, 3, 3}, 17, -4, 4);
    for (double target : {0.0, 1.0}) {
        double ref = 0;
        for (double z : l.data) {
            const double p = 1.0 / (1.0 + std::exp(-z));
            ref += -(target * std::log(p) + (1 - target) * std::log(1 - p));
        }
        EXPECT_NEAR(bce_with_logits(constant(l), target).item(), ref / 9, 1e-12);
        EXPECT_LT(check_gradient([&](const Var& v) { return bce_with_logits(v, target); }, l).rel_error, kTol);
    }
    // stable at extreme logits
    const Tensor ext({1, 1, 1, 2}, {-1000.0, 1000.0});
    EXPECT_NEAR(bce_with_logits(constant(ext), 1.0).item(), 500.0, 1e-9);
}

TEST(Graph, SharedSubexpressionAccumulates) {
    Var x = parameter(Tensor({1, 1, 1, 1}, {3.0}));
    const Var y = add(mul(x, x), scale(x, 2.0));  // x^2 + 2x
    backward(y);
    EXPECT_DOUBLE_EQ(x.grad().data[0], 8.0);
}

TEST(Graph, DetachAndConstantsCarryNoGradient) {
    Var x = parameter(Tensor({1, 1, 1, 2}, {1.0, 2.0}));
    Var c = constant(Tensor({1, 1, 1, 2}, {5.0, 5.0}));
    backward(sum(add(mul(detach(x), x), c)));
    EXPECT_EQ(x.grad().data, (std::vector<double>{1.0, 2.0}));
    EXPECT_FALSE(c.has_grad());
}

TEST(Graph, NoGradGuardStopsRecording) {
    Var x = parameter(Tensor({1, 1, 1, 1}, {2.0}));
    EXPECT_TRUE(grad_enabled());
    {
        NoGradGuard g;
        EXPECT_FALSE(grad_enabled());
        const Var y = mul(x, x);
        EXPECT_FALSE(y.requires_grad());
        EXPECT_DOUBLE_EQ(y.item(), 4.0);
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_TRUE(mul(x, x).requires_grad());
}

TEST(Dropout, ScalingAndDeterminism) {
    const Tensor x({1, 1, 100, 100}, 1.0);
    Rng r1(5), r2(5);
    const Tensor a = dropout(constant(x), 0.5, r1).value(), b = dropout(constant(x), 0.5, r2).value();
    EXPECT_EQ(a.data, b.data);
    std::size_t kept = 0;
    for (double v : a.data) {
        EXPECT_TRUE(v == 0.0 || v == 2.0);
        kept += v != 0.0;
    }
    EXPECT_NEAR(kept / 10000.0, 0.5, 0.03);
    Rng r3(1);
    EXPECT_EQ(dropout(constant(x), 0.0, r3).value().data, x.data);
}

TEST(ParamStore, RegistryAndSnapshot) {
    nn::ParamStore store;
    store.add("a.weight", Tensor({2, 1, 1, 1}, 1.0));
    store.add("a.bias", Tensor({1, 2, 1, 1}, 0.0));
    EXPECT_THROW(store.add("a.weight", Tensor({1, 1, 1, 1})), ConfigError);
    EXPECT_THROW(store.find("nope"), ConfigError);
    EXPECT_EQ(store.scalar_count(), 4u);
    EXPECT_EQ(store.scalar_count("a.b"), 2u);
    auto snap = store.snapshot();
    snap["a.weight"].data[0] = 7.0;
    store.restore(snap);
    EXPECT_EQ(store.find("a.weight").value().data[0], 7.0);
    snap["a.bias"] = Tensor({1, 3, 1, 1});
    EXPECT_THROW(store.restore(snap), ConfigError);
}

TEST(ParamStore, InitIsSeededNormal) {
    auto build = [](std::uint64_t seed) {
        nn::ParamStore s;
        nn::Conv2d::create(s, "c", 16, 64, 3, 1, 1);
        nn::Conv2d::create(s, "d", 64, 192, 3, 1, 1);
        nn::init_params(s, seed);
        return s.snapshot();
    };
    const auto a = build(3), b = build(3), c = build(4);
    EXPECT_EQ(a.at("c.weight").data, b.at("c.weight").data);
    EXPECT_NE(a.at("c.weight").data, c.at("c.weight").data);
    std::vector<double> w = a.at("c.weight").data;
    w.insert(w.end(), a.at("d.weight").data.begin(), a.at("d.weight").data.end());
    ASSERT_GE(w.size(), 100000u);
    double m = 0, v = 0;
    for (double x : w) m += x;
    m /= w.size();
    for (double x : w) v += (x - m) * (x - m);
    const double sd = std::sqrt(v / w.size());
    EXPECT_LT(std::abs(m), 3 * 0.02 / std::sqrt(static_cast<double>(w.size())));
    EXPECT_NEAR(sd, 0.02, 0.02 * 0.05);
    for (double x : a.at("c.bias").data) EXPECT_EQ(x, 0.0);
}
