#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdrgan/autograd.hpp"
#include "hdrgan/image.hpp"
#include "hdrgan/nn.hpp"
#include "hdrgan/oemask.hpp"

namespace hdrgan {

class Rng;

enum class Variant {
    kAttnR2,  // recurrent-residual blocks + attention-gated skips
    kR2,      // recurrent-residual blocks, plain skips
    kAttn,    // plain double-conv blocks + attention-gated skips
};

std::string to_string(Variant v);
// Accepts "AttnR2", "R2", "Attn" (also the *_UNet spellings, case-insensitive).
Variant parse_variant(const std::string& s);

enum class NormKind { kInstance, kNone };
std::string to_string(NormKind n);
NormKind parse_norm(const std::string& s);

struct ArchConfig {
    Variant variant = Variant::kAttnR2;
    int base_filters = 64;
    int depth = 5;  // bottleneck filters = base_filters * 2^(depth-1)
    int recurrence_steps = 2;
    int in_channels = 3;
    int out_channels = 3;
    double dropout = 0.5;     // decoder dropout rate while training
    int dropout_levels = 3;   // applied to this many deepest decoder levels
    NormKind norm = NormKind::kInstance;

    void validate() const;
    int size_multiple() const { return 1 << (depth - 1); }
    int bottleneck_filters() const { return base_filters << (depth - 1); }
};

struct DiscriminatorConfig {
    int base_filters = 64;
    int downsampling_layers = 3;  // stride-2 stages; the 70x70 patch classifier uses 3
    NormKind norm = NormKind::kInstance;

    void validate() const;
};

// Common interface of the per-level feature blocks.
class FeatureBlock {
public:
    virtual ~FeatureBlock() = default;
    virtual ag::Var forward(const ag::Var& x) const = 0;
};

// f_0 = act(norm(conv(x))); f_k = act(norm(conv(x + f_{k-1}))) for k < steps, one shared conv.
class RecurrentConvUnit {
public:
    RecurrentConvUnit(nn::ParamStore& store, const std::string& name, int channels, int steps, NormKind norm);
    ag::Var forward(const ag::Var& x) const;
    const nn::Conv2d& conv() const { return conv_; }

private:
    nn::Conv2d conv_;
    int steps_;
    NormKind norm_;
};

// out = x' + unit2(unit1(x')), x' = 1x1 channel match of x (identity when channels agree).
class RecurrentResidualBlock final : public FeatureBlock {
public:
    RecurrentResidualBlock(nn::ParamStore& store, const std::string& name, int in_channels, int out_channels,
                           int steps, NormKind norm);
    ag::Var forward(const ag::Var& x) const override;
    ag::Var channel_match(const ag::Var& x) const;

private:
    std::optional<nn::Conv2d> match_;
    RecurrentConvUnit unit1_, unit2_;
};

// conv-norm-relu twice; no recurrence, no residual path.
class DoubleConvBlock final : public FeatureBlock {
public:
    DoubleConvBlock(nn::ParamStore& store, const std::string& name, int in_channels, int out_channels,
                    NormKind norm);
    ag::Var forward(const ag::Var& x) const override;

private:
    nn::Conv2d conv1_, conv2_;
    NormKind norm_;
};

// a = sigmoid(conv1x1(relu(skip_proj(skip) + gate_proj(up(gate))))), out = a * skip.
class AttentionGate {
public:
    AttentionGate(nn::ParamStore& store, const std::string& name, int skip_channels, int gate_channels,
                  int inter_channels);
    ag::Var forward(const ag::Var& skip, const ag::Var& gate) const;
    // Attention coefficients alone, shape [n,1,h,w].
    ag::Var coefficients(const ag::Var& skip, const ag::Var& gate) const;
    const nn::Conv2d& coef() const { return coef_; }

private:
    nn::Conv2d skip_proj_, gate_proj_, coef_;
};

// Encoder-decoder used for each of the three generator stages.
class AR2UNet {
public:
    AR2UNet(const ArchConfig& cfg, nn::ParamStore& store, const std::string& prefix);
    AR2UNet(const AR2UNet&) = delete;
    AR2UNet& operator=(const AR2UNet&) = delete;
    AR2UNet(AR2UNet&&) = default;

    // x: [n, in_channels, h, w] with h, w divisible by 2^(depth-1). Output is non-negative.
    ag::Var forward(const ag::Var& x, bool training = false, Rng* dropout_rng = nullptr) const;
    const ArchConfig& config() const { return cfg_; }
    std::size_t attention_gate_count() const;

private:
    ArchConfig cfg_;
    std::vector<std::unique_ptr<FeatureBlock>> encoders_;
    std::vector<nn::Conv2d> downs_;
    std::vector<nn::Conv2d> ups_;
    std::vector<std::optional<AttentionGate>> gates_;
    std::vector<std::unique_ptr<FeatureBlock>> decoders_;
    nn::Conv2d head_;
};

// Intermediate and final generator products, all [n, 3, h, w].
struct GeneratorOutputs {
    ag::Var linearized;  // linear irradiance estimate of the LDR input
    ag::Var corrected;   // correction net output where alpha = 1, linearized elsewhere
    ag::Var hdr;         // refinement of corrected
    ag::Tensor alpha;    // [n, 1, h, w] mask actually used
};

// Linearization, over-exposure correction and refinement nets.
// Parameter names are prefixed "lin.", "corr.", "refine.".
class Generator {
public:
    Generator(const ArchConfig& cfg, std::uint64_t seed, const nn::InitScheme& init = {});
    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;

    GeneratorOutputs forward(const ag::Var& ldr, const ag::Tensor& alpha, bool training = false,
                             Rng* dropout_rng = nullptr) const;

    // Correction net alone on an arbitrary input; used to check the compositing independently.
    ag::Var correction(const ag::Var& linearized, bool training = false, Rng* dropout_rng = nullptr) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const ArchConfig& config() const { return cfg_; }

private:
    ArchConfig cfg_;
    nn::ParamStore params_;
    AR2UNet lin_, corr_, refine_;
};

// Conditional PatchGAN classifier over the channel concatenation (LDR, tonemapped HDR).
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed, const nn::InitScheme& init = {});
    Discriminator(const Discriminator&) = delete;
    Discriminator& operator=(const Discriminator&) = delete;

    // Pre-sigmoid logits [n, 1, h', w'].
    ag::Var forward(const ag::Var& ldr, const ag::Var& tonemapped) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const DiscriminatorConfig& config() const { return cfg_; }

    // Logit grid size for an input size, or throws ArgumentError if the input is too small.
    static std::pair<int, int> output_size(int height, int width, const DiscriminatorConfig& cfg);

private:
    struct Stage {
        nn::Conv2d conv;
        bool norm;
        bool activation;
    };
    DiscriminatorConfig cfg_;
    nn::ParamStore params_;
    std::vector<Stage> stages_;
};

// Image <-> tensor helpers (batch of one unless stated).
ag::Tensor to_tensor(const RgbBuffer& image);
ag::Tensor to_tensor(const OEMask& mask);
ag::Tensor stack(const std::vector<ag::Tensor>& items);
// Extracts sample n of a [N,3,H,W] tensor; negatives clamp to 0, non-finite values throw DataError.
HdrImage to_hdr_image(const ag::Tensor& t, int n = 0);

}  // namespace hdrgan
