#include "hdrgan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hdrgan/error.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan {

void LossWeights::validate() const {
    if (!(rec_weight >= 0.0) || !(perc_weight >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

RandomConvExtractor::RandomConvExtractor() : RandomConvExtractor(Options{}) {}

RandomConvExtractor::RandomConvExtractor(Options options) : options_(std::move(options)) {
    if (options_.channels.empty()) throw ConfigError("feature extractor needs at least one stage");
    for (int t : options_.taps) {
        if (t < 0 || t >= static_cast<int>(options_.channels.size())) {
            throw ConfigError("feature tap " + std::to_string(t) + " outside the " +
                              std::to_string(options_.channels.size()) + "-stage pyramid");
        }
    }
    int prev = 3;
    for (std::size_t i = 0; i < options_.channels.size(); ++i) {
        stages_.push_back(nn::Conv2d::create(store_, "stage" + std::to_string(i), prev, options_.channels[i], 3, 1, 1));
        prev = options_.channels[i];
    }
    Rng rng(options_.seed);
    for (const auto& p : store_.params()) {
        auto& data = const_cast<ag::Var&>(p.var).mutable_value().data;
        if (p.name.ends_with(".bias")) continue;
        const auto& s = p.var.shape();
        const double stddev = std::sqrt(2.0 / (s.c * s.h * s.w));
        for (auto& v : data) v = stddev * rng.normal();
    }
}

std::vector<ag::Var> RandomConvExtractor::features(const ag::Var& x) const {
    const int needed = 1 << (*std::max_element(options_.taps.begin(), options_.taps.end()) + 1);
    if (x.shape().c != 3 || x.shape().h < needed || x.shape().w < needed) {
        throw ConfigError("feature extractor taps need a 3-channel input of at least " + std::to_string(needed) +
                          "x" + std::to_string(needed) + ", got " + x.shape().str());
    }
    std::vector<ag::Var> out;
    ag::Var f = x;
    const int last = *std::max_element(options_.taps.begin(), options_.taps.end());
    for (int i = 0; i <= last; ++i) {
        // Frozen: weights are used as constants so no gradient is stored for them.
        const auto& st = stages_[i];
        f = ag::avg_pool2(ag::relu(ag::conv2d(f, ag::detach(st.weight), ag::detach(st.bias), 1, 1)));
        if (std::find(options_.taps.begin(), options_.taps.end(), i) != options_.taps.end()) out.push_back(f);
    }
    return out;
}

ag::Var rec_loss(const ag::Var& h_gen, const ag::Var& h_gt, double mu) {
    if (!(h_gen.shape() == h_gt.shape())) {
        throw ArgumentError("rec_loss: shape mismatch " + h_gen.shape().str() + " vs " + h_gt.shape().str());
    }
    return ag::mean(ag::abs(ag::sub(ag::mu_tonemap(h_gen, mu), ag::mu_tonemap(h_gt, mu))));
}

ag::Var perceptual_loss(const ag::Var& h_gen, const ag::Var& h_gt, const FeatureExtractor& extractor, double mu) {
    if (!(h_gen.shape() == h_gt.shape())) {
        throw ArgumentError("perceptual_loss: shape mismatch " + h_gen.shape().str() + " vs " + h_gt.shape().str());
    }
    const auto fa = extractor.features(ag::mu_tonemap(h_gen, mu));
    const auto fb = extractor.features(ag::mu_tonemap(h_gt, mu));
    if (fa.empty() || fa.size() != fb.size()) throw ConfigError("feature extractor returned mismatched tap lists");
    ag::Var total;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const double count = static_cast<double>(fa[l].value().numel());
        const ag::Var term = ag::scale(ag::l2_norm(ag::sub(fa[l], fb[l])), 1.0 / count);
        total = total ? ag::add(total, term) : term;
    }
    return total;
}

ag::Var gan_loss_d(const ag::Var& logits_real, const ag::Var& logits_fake) {
    if (!(logits_real.shape() == logits_fake.shape())) {
        throw ArgumentError("gan_loss_d: logit grids differ " + logits_real.shape().str() + " vs " +
                            logits_fake.shape().str());
    }
    return ag::scale(ag::add(ag::bce_with_logits(logits_real, 1.0), ag::bce_with_logits(logits_fake, 0.0)), 0.5);
}

ag::Var gan_loss_g(const ag::Var& logits_fake) { return ag::bce_with_logits(logits_fake, 1.0); }

ag::Var total_g_loss(const ag::Var& gan, const ag::Var& rec, const ag::Var& perc, const LossWeights& w) {
    total_g_loss(gan.item(), rec.item(), perc.item(), w);
    return ag::add(gan, ag::scale(ag::add(rec, ag::scale(perc, w.perc_weight)), w.rec_weight));
}

double total_g_loss(double gan, double rec, double perc, const LossWeights& w) {
    w.validate();
    if (!std::isfinite(gan) || !std::isfinite(rec) || !std::isfinite(perc)) {
        throw NumericError("non-finite loss component (gan=" + std::to_string(gan) + ", rec=" + std::to_string(rec) +
                           ", perc=" + std::to_string(perc) + ")");
    }
    return gan + w.rec_weight * (rec + w.perc_weight * perc);
}

}  // namespace hdrgan
