#include <gtest/gtest.h>

#include <cmath>

#include "hdrgan/error.hpp"
#include "hdrgan/optim.hpp"

using namespace hdrgan;
using namespace hdrgan::ag;

namespace {

void set_grad(const Var& v, std::vector<double> g) {
    Var p = v;
    p.zero_grad();
    p.node()->grad_buffer().data = std::move(g);
}

}  // namespace

TEST(Adam, FirstStepMatchesHandComputation) {
    nn::ParamStore s;
    const Var p = s.add("w", Tensor({1, 1, 1, 2}, {1.0, -2.0}));
    Adam opt(s, {0.5, 0.999, 1e-8, 0.0});
    set_grad(p, {0.3, -0.05});
    opt.step(0.01);
    // m = 0.15, v = 9e-5, mhat = 0.3, vhat = 0.09: 1 - 0.01 * 0.3 / (0.3 + 1e-8)
    EXPECT_NEAR(p.value().data[0], 0.9900000003333333, 1e-7);
    EXPECT_NEAR(p.value().data[0], 0.9900000003333333, 1e-15);
    // -2 + 0.01 * 0.05 / (0.05 + 1e-8)
    EXPECT_NEAR(p.value().data[1], -1.9900000019999996, 1e-15);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, SecondStepUsesBiasCorrectedMoments) {
    nn::ParamStore s;
    const Var p = s.add("w", Tensor({1, 1, 1, 1}, {1.0}));
    Adam opt(s, {0.5, 0.999, 1e-8, 0.0});
    set_grad(p, {0.3});
    opt.step(0.01);
    const double after1 = p.value().data[0];
    set_grad(p, {-0.2});
    opt.step(0.01);
    // m = -0.025, v = 0.999 * 9e-5 + 0.001 * 0.04 = 1.2991e-4
    const long double mhat = -0.025L / 0.75L;
    const long double vhat = 1.2991e-4L / (1.0L - 0.999L * 0.999L);
    const long double expect = after1 - 0.01L * mhat / (std::sqrt(vhat) + 1e-8L);
    EXPECT_NEAR(p.value().data[0], static_cast<double>(expect), 1e-7);
    EXPECT_NEAR(opt.first_moments()[0].data[0], -0.025, 1e-15);
    EXPECT_NEAR(opt.second_moments()[0].data[0], 1.2991e-4, 1e-17);
}

TEST(Adam, ZeroLearningRateAndMissingGradientLeaveValues) {
    nn::ParamStore s;
    const Var a = s.add("a", Tensor({1, 1, 1, 3}, {0.1, 0.2, 0.3}));
    const Var b = s.add("b", Tensor({1, 1, 1, 1}, {4.0}));
    Adam opt(s, {});
    set_grad(a, {1.0, -1.0, 0.5});
    opt.step(0.0);
    EXPECT_EQ(a.value().data, (std::vector<double>{0.1, 0.2, 0.3}));
    opt.step(0.1);
    EXPECT_NE(a.value().data[0], 0.1);
    EXPECT_EQ(b.value().data[0], 4.0);
}

TEST(Adam, GlobalNormClipScalesGradients) {
    nn::ParamStore s1, s2;
    const Var p1 = s1.add("w", Tensor({1, 1, 1, 2}, {0.0, 0.0}));
    const Var p2 = s2.add("w", Tensor({1, 1, 1, 2}, {0.0, 0.0}));
    Adam clipped(s1, {0.5, 0.999, 1e-8, 1.0}), plain(s2, {0.5, 0.999, 1e-8, 0.0});
    set_grad(p1, {30.0, 40.0});  // norm 50 -> clipped to (0.6, 0.8)
    set_grad(p2, {0.6, 0.8});
    clipped.step(0.1);
    plain.step(0.1);
    EXPECT_NEAR(clipped.first_moments()[0].data[1], 0.4, 1e-15);
    EXPECT_EQ(p1.value().data, p2.value().data);
}

TEST(Adam, StateRestoreAndValidation) {
    nn::ParamStore s;
    s.add("w", Tensor({1, 1, 1, 2}));
    Adam opt(s, {});
    EXPECT_THROW(opt.set_state(1, {}, {}), ConfigError);
    EXPECT_THROW(opt.set_state(1, {Tensor({1, 1, 1, 3})}, {Tensor({1, 1, 1, 3})}), ConfigError);
    opt.set_state(5, {Tensor({1, 1, 1, 2}, 0.5)}, {Tensor({1, 1, 1, 2}, 0.25)});
    EXPECT_EQ(opt.steps(), 5);
    EXPECT_THROW(Adam(s, {1.0, 0.999, 1e-8, 0.0}), ConfigError);
    EXPECT_THROW(Adam(s, {0.5, 0.999, 0.0, 0.0}), ConfigError);
}
