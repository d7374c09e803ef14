#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hdrgan/autograd.hpp"
#include "hdrgan/nn.hpp"

namespace hdrgan {

struct LossWeights {
    double rec_weight = 100.0;
    double perc_weight = 0.005;

    void validate() const;
};

// Frozen feature pyramid used by the perceptual loss.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    // One tensor per tap point. Throws ConfigError when the input cannot feed every tap.
    virtual std::vector<ag::Var> features(const ag::Var& x) const = 0;
};

// Single tap returning the input itself.
class IdentityExtractor final : public FeatureExtractor {
public:
    std::string name() const override { return "identity"; }
    std::vector<ag::Var> features(const ag::Var& x) const override { return {x}; }
};

// Fixed random-weight pyramid: each stage is conv3x3 -> relu -> 2x2 average pool,
// tapped after the pool. Weights are He-normal from the seed and never trained.
class RandomConvExtractor final : public FeatureExtractor {
public:
    struct Options {
        std::uint64_t seed = 0x5EEDF00DULL;
        std::vector<int> channels{16, 32, 64, 64, 64};
        std::vector<int> taps{0, 1, 2, 3, 4};  // stage indices
    };

    RandomConvExtractor();
    explicit RandomConvExtractor(Options options);

    std::string name() const override { return "random-conv"; }
    std::vector<ag::Var> features(const ag::Var& x) const override;
    const Options& options() const { return options_; }

private:
    Options options_;
    nn::ParamStore store_;
    std::vector<nn::Conv2d> stages_;
};

// mean |mu_tonemap(gen) - mu_tonemap(gt)|.
ag::Var rec_loss(const ag::Var& h_gen, const ag::Var& h_gt, double mu = 5000.0);
// sum over taps of the L2 distance between features of the tonemapped images, each over its element count.
ag::Var perceptual_loss(const ag::Var& h_gen, const ag::Var& h_gt, const FeatureExtractor& extractor,
                        double mu = 5000.0);
// 0.5 * [BCE(real, 1) + BCE(fake, 0)], averaged over patches.
ag::Var gan_loss_d(const ag::Var& logits_real, const ag::Var& logits_fake);
// Non-saturating generator objective BCE(fake, 1).
ag::Var gan_loss_g(const ag::Var& logits_fake);
// gan + rec_weight * (rec + perc_weight * perc).
ag::Var total_g_loss(const ag::Var& gan, const ag::Var& rec, const ag::Var& perc, const LossWeights& w);
// Scalar form; throws NumericError on non-finite input.
double total_g_loss(double gan, double rec, double perc, const LossWeights& w);

}  // namespace hdrgan
