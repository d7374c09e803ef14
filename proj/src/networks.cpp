#include "hdrgan/networks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hdrgan/error.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

ag::Var normalize(const ag::Var& x, NormKind norm) {
    return norm == NormKind::kInstance ? ag::instance_norm(x) : x;
}

bool uses_attention(Variant v) { return v != Variant::kR2; }

std::unique_ptr<FeatureBlock> make_block(const ArchConfig& cfg, nn::ParamStore& store, const std::string& name,
                                         int cin, int cout) {
    if (cfg.variant == Variant::kAttn) return std::make_unique<DoubleConvBlock>(store, name, cin, cout, cfg.norm);
    return std::make_unique<RecurrentResidualBlock>(store, name, cin, cout, cfg.recurrence_steps, cfg.norm);
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::kAttnR2: return "AttnR2";
        case Variant::kR2: return "R2";
        case Variant::kAttn: return "Attn";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    std::string k = lower(s);
    if (k.size() > 5 && k.compare(k.size() - 5, 5, "_unet") == 0) k.resize(k.size() - 5);
    if (k == "attnr2" || k == "ar2u" || k == "ar2u_net") return Variant::kAttnR2;
    if (k == "r2") return Variant::kR2;
    if (k == "attn") return Variant::kAttn;
    throw ArgumentError("unknown architecture variant '" + s + "' (expected AttnR2, R2 or Attn)");
}

std::string to_string(NormKind n) { return n == NormKind::kInstance ? "instance" : "none"; }

NormKind parse_norm(const std::string& s) {
    const std::string k = lower(s);
    if (k == "instance") return NormKind::kInstance;
    if (k == "none") return NormKind::kNone;
    throw ArgumentError("unknown normalisation '" + s + "' (expected instance or none)");
}

void ArchConfig::validate() const {
    if (depth < 2 || depth > 12) throw ConfigError("depth must lie in [2,12], got " + std::to_string(depth));
    if (base_filters < 1) throw ConfigError("base_filters must be >= 1");
    if (recurrence_steps < 1) throw ConfigError("recurrence_steps must be >= 1");
    if (in_channels < 1 || out_channels < 1) throw ConfigError("channel counts must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
    if (dropout_levels < 0) throw ConfigError("dropout_levels must be >= 0");
}

void DiscriminatorConfig::validate() const {
    if (base_filters < 1) throw ConfigError("discriminator base_filters must be >= 1");
    if (downsampling_layers < 1) throw ConfigError("discriminator needs at least one stride-2 stage");
}

// ---- blocks -------------------------------------------------------------------

RecurrentConvUnit::RecurrentConvUnit(nn::ParamStore& store, const std::string& name, int channels, int steps,
                                     NormKind norm)
    : conv_(nn::Conv2d::create(store, name + ".conv", channels, channels, 3, 1, 1)), steps_(steps), norm_(norm) {
    if (steps < 1) throw ConfigError("recurrence steps must be >= 1");
}

ag::Var RecurrentConvUnit::forward(const ag::Var& x) const {
    ag::Var f = ag::relu(normalize(conv_(x), norm_));
    for (int k = 1; k < steps_; ++k) f = ag::relu(normalize(conv_(ag::add(x, f)), norm_));
    return f;
}

RecurrentResidualBlock::RecurrentResidualBlock(nn::ParamStore& store, const std::string& name, int in_channels,
                                               int out_channels, int steps, NormKind norm)
    : match_(in_channels == out_channels
                 ? std::nullopt
                 : std::optional<nn::Conv2d>(nn::Conv2d::create(store, name + ".match", in_channels, out_channels, 1, 1, 0))),
      unit1_(store, name + ".unit1", out_channels, steps, norm),
      unit2_(store, name + ".unit2", out_channels, steps, norm) {}

ag::Var RecurrentResidualBlock::channel_match(const ag::Var& x) const {
    if (match_) return (*match_)(x);
    if (x.shape().c != unit1_.conv().in_channels()) {
        throw ConfigError("recurrent residual block expects " + std::to_string(unit1_.conv().in_channels()) +
                          " channels, got " + std::to_string(x.shape().c));
    }
    return x;
}

ag::Var RecurrentResidualBlock::forward(const ag::Var& x) const {
    const ag::Var xm = channel_match(x);
    return ag::add(xm, unit2_.forward(unit1_.forward(xm)));
}

DoubleConvBlock::DoubleConvBlock(nn::ParamStore& store, const std::string& name, int in_channels, int out_channels,
                                 NormKind norm)
    : conv1_(nn::Conv2d::create(store, name + ".conv1", in_channels, out_channels, 3, 1, 1)),
      conv2_(nn::Conv2d::create(store, name + ".conv2", out_channels, out_channels, 3, 1, 1)),
      norm_(norm) {}

ag::Var DoubleConvBlock::forward(const ag::Var& x) const {
    return ag::relu(normalize(conv2_(ag::relu(normalize(conv1_(x), norm_))), norm_));
}

AttentionGate::AttentionGate(nn::ParamStore& store, const std::string& name, int skip_channels, int gate_channels,
                             int inter_channels)
    : skip_proj_(nn::Conv2d::create(store, name + ".skip_proj", skip_channels, inter_channels, 1, 1, 0)),
      gate_proj_(nn::Conv2d::create(store, name + ".gate_proj", gate_channels, inter_channels, 1, 1, 0)),
      coef_(nn::Conv2d::create(store, name + ".coef", inter_channels, 1, 1, 1, 0)) {}

ag::Var AttentionGate::coefficients(const ag::Var& skip, const ag::Var& gate) const {
    const auto& s = skip.shape();
    const auto& g = gate.shape();
    if (g.n != s.n || g.h <= 0 || s.h % g.h != 0 || s.w % g.w != 0 || s.h / g.h != s.w / g.w) {
        throw ConfigError("attention gate cannot resample gate " + g.str() + " onto skip " + s.str());
    }
    const ag::Var gated = ag::upsample_nearest(gate_proj_(gate), s.h / g.h);
    return ag::sigmoid(coef_(ag::relu(ag::add(skip_proj_(skip), gated))));
}

ag::Var AttentionGate::forward(const ag::Var& skip, const ag::Var& gate) const {
    return ag::mul_spatial(skip, coefficients(skip, gate));
}

// ---- U-Net ----------------------------------------------------------------------

AR2UNet::AR2UNet(const ArchConfig& cfg, nn::ParamStore& store, const std::string& prefix) : cfg_(cfg) {
    cfg_.validate();
    const std::string p = prefix.empty() ? "" : prefix + ".";
    auto filters = [&](int level) { return cfg_.base_filters << level; };

    encoders_.push_back(make_block(cfg_, store, p + "enc0", cfg_.in_channels, filters(0)));
    for (int i = 1; i < cfg_.depth; ++i) {
        downs_.push_back(nn::Conv2d::create(store, p + "down" + std::to_string(i), filters(i - 1), filters(i - 1), 3, 2, 1));
        encoders_.push_back(make_block(cfg_, store, p + "enc" + std::to_string(i), filters(i - 1), filters(i)));
    }
    ups_.resize(cfg_.depth - 1);
    gates_.resize(cfg_.depth - 1);
    decoders_.resize(cfg_.depth - 1);
    for (int i = cfg_.depth - 2; i >= 0; --i) {
        const std::string lvl = std::to_string(i);
        ups_[i] = nn::Conv2d::create(store, p + "up" + lvl, filters(i + 1), filters(i), 3, 1, 1);
        if (uses_attention(cfg_.variant)) {
            gates_[i].emplace(store, p + "att" + lvl, filters(i), filters(i + 1), std::max(1, filters(i) / 2));
        }
        decoders_[i] = make_block(cfg_, store, p + "dec" + lvl, 2 * filters(i), filters(i));
    }
    head_ = nn::Conv2d::create(store, p + "head", filters(0), cfg_.out_channels, 1, 1, 0);
}

std::size_t AR2UNet::attention_gate_count() const {
    return static_cast<std::size_t>(std::count_if(gates_.begin(), gates_.end(), [](const auto& g) { return g.has_value(); }));
}

ag::Var AR2UNet::forward(const ag::Var& x, bool training, Rng* dropout_rng) const {
    const auto& s = x.shape();
    const int m = cfg_.size_multiple();
    if (s.c != cfg_.in_channels) {
        throw ArgumentError("network expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                            std::to_string(s.c));
    }
    if (s.h % m != 0 || s.w % m != 0) {
        throw ArgumentError("input " + std::to_string(s.w) + "x" + std::to_string(s.h) +
                            " must have width and height divisible by " + std::to_string(m) + " (2^(depth-1))");
    }
    std::vector<ag::Var> skips;
    skips.reserve(cfg_.depth);
    skips.push_back(encoders_[0]->forward(x));
    for (int i = 1; i < cfg_.depth; ++i) skips.push_back(encoders_[i]->forward(downs_[i - 1](skips.back())));

    ag::Var d = skips.back();
    for (int i = cfg_.depth - 2; i >= 0; --i) {
        const ag::Var up = ag::relu(normalize(ups_[i](ag::upsample_nearest(d, 2)), cfg_.norm));
        const ag::Var skip = gates_[i] ? gates_[i]->forward(skips[i], d) : skips[i];
        ag::Var next = decoders_[i]->forward(ag::concat_channels(skip, up));
        const int from_bottom = cfg_.depth - 2 - i;
        if (training && cfg_.dropout > 0.0 && from_bottom < cfg_.dropout_levels) {
            if (!dropout_rng) throw ArgumentError("training-mode forward needs a dropout RNG");
            next = ag::dropout(next, cfg_.dropout, *dropout_rng);
        }
        d = next;
    }
    return ag::relu(head_(d));
}

// ---- generator ------------------------------------------------------------------

Generator::Generator(const ArchConfig& cfg, std::uint64_t seed, const nn::InitScheme& init)
    : cfg_(cfg), lin_(cfg, params_, "lin"), corr_(cfg, params_, "corr"), refine_(cfg, params_, "refine") {
    nn::init_params(params_, seed, init);
}

ag::Var Generator::correction(const ag::Var& linearized, bool training, Rng* dropout_rng) const {
    return corr_.forward(linearized, training, dropout_rng);
}

GeneratorOutputs Generator::forward(const ag::Var& ldr, const ag::Tensor& alpha, bool training,
                                    Rng* dropout_rng) const {
    const auto& s = ldr.shape();
    if (alpha.shape.n != s.n || alpha.shape.c != 1 || alpha.shape.h != s.h || alpha.shape.w != s.w) {
        throw ArgumentError("mask " + alpha.shape.str() + " does not match image " + s.str());
    }
    GeneratorOutputs out;
    out.alpha = alpha;
    out.linearized = lin_.forward(ldr, training, dropout_rng);
    const ag::Var corrected = corr_.forward(out.linearized, training, dropout_rng);
    out.corrected = ag::blend(corrected, out.linearized, alpha);
    out.hdr = refine_.forward(out.corrected, training, dropout_rng);
    return out;
}

// ---- discriminator ---------------------------------------------------------------

Discriminator::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed, const nn::InitScheme& init)
    : cfg_(cfg) {
    cfg_.validate();
    int prev = 6;
    int nf = cfg_.base_filters;
    stages_.push_back({nn::Conv2d::create(params_, "stage0", prev, nf, 4, 2, 1), false, true});
    prev = nf;
    for (int l = 1; l < cfg_.downsampling_layers; ++l) {
        nf = cfg_.base_filters * std::min(1 << l, 8);
        stages_.push_back({nn::Conv2d::create(params_, "stage" + std::to_string(l), prev, nf, 4, 2, 1),
                           cfg_.norm == NormKind::kInstance, true});
        prev = nf;
    }
    nf = cfg_.base_filters * std::min(1 << cfg_.downsampling_layers, 8);
    stages_.push_back({nn::Conv2d::create(params_, "stage" + std::to_string(cfg_.downsampling_layers), prev, nf, 4, 1, 1),
                       cfg_.norm == NormKind::kInstance, true});
    stages_.push_back({nn::Conv2d::create(params_, "logits", nf, 1, 4, 1, 1), false, false});
    nn::init_params(params_, seed, init);
}

std::pair<int, int> Discriminator::output_size(int height, int width, const DiscriminatorConfig& cfg) {
    auto step = [](int v, int stride) { return v + 2 - 4 < 0 ? 0 : (v + 2 - 4) / stride + 1; };
    int h = height, w = width;
    for (int l = 0; l < cfg.downsampling_layers; ++l) {
        h = step(h, 2);
        w = step(w, 2);
    }
    h = step(step(h, 1), 1);
    w = step(step(w, 1), 1);
    if (h <= 0 || w <= 0) {
        throw ArgumentError("discriminator input " + std::to_string(width) + "x" + std::to_string(height) +
                            " is too small for the patch classifier");
    }
    return {h, w};
}

ag::Var Discriminator::forward(const ag::Var& ldr, const ag::Var& tonemapped) const {
    const auto& a = ldr.shape();
    const auto& b = tonemapped.shape();
    if (a.n != b.n || a.h != b.h || a.w != b.w || a.c != 3 || b.c != 3) {
        throw ArgumentError("discriminator inputs must be matching 3-channel images, got " + a.str() + " and " + b.str());
    }
    output_size(a.h, a.w, cfg_);
    ag::Var x = ag::concat_channels(ldr, tonemapped);
    for (const auto& st : stages_) {
        x = st.conv(x);
        if (st.norm) x = ag::instance_norm(x);
        if (st.activation) x = ag::leaky_relu(x, 0.2);
    }
    return x;
}

// ---- conversions ------------------------------------------------------------------

ag::Tensor to_tensor(const RgbBuffer& image) {
    const int w = image.width(), h = image.height();
    ag::Tensor t(ag::Shape{1, 3, h, w});
    const auto px = image.pixels();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = px[(static_cast<std::size_t>(y) * w + x) * 3 + c];
        }
    }
    return t;
}

ag::Tensor to_tensor(const OEMask& mask) {
    ag::Tensor t(ag::Shape{1, 1, mask.height(), mask.width()});
    std::transform(mask.values().begin(), mask.values().end(), t.data.begin(),
                   [](std::uint8_t v) { return static_cast<double>(v); });
    return t;
}

ag::Tensor stack(const std::vector<ag::Tensor>& items) {
    if (items.empty()) throw ArgumentError("cannot stack an empty batch");
    ag::Shape s = items.front().shape;
    for (const auto& t : items) {
        if (t.shape.c != s.c || t.shape.h != s.h || t.shape.w != s.w) {
            throw DataError("batch items differ in shape: " + t.shape.str() + " vs " + s.str());
        }
    }
    int total = 0;
    for (const auto& t : items) total += t.shape.n;
    ag::Tensor out(ag::Shape{total, s.c, s.h, s.w});
    std::size_t offset = 0;
    for (const auto& t : items) {
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += t.data.size();
    }
    return out;
}

HdrImage to_hdr_image(const ag::Tensor& t, int n) {
    if (t.shape.c != 3 || n < 0 || n >= t.shape.n) throw ArgumentError("tensor " + t.shape.str() + " is not an RGB batch");
    const int h = t.shape.h, w = t.shape.w;
    std::vector<float> px(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = t.at(n, c, y, x);
                if (!std::isfinite(v)) {
                    throw DataError("non-finite network output at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
                }
                px[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<float>(std::max(v, 0.0));
            }
        }
    }
    return HdrImage(w, h, std::move(px));
}

}  // namespace hdrgan
