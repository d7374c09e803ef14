#include "hdrgan/optim.hpp"

#include <cmath>

#include "hdrgan/error.hpp"

namespace hdrgan {

Adam::Adam(nn::ParamStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {
    if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) || !(cfg_.eps > 0.0)) {
        throw ConfigError("Adam needs beta1, beta2 in [0,1) and eps > 0");
    }
    for (const auto& p : store.params()) {
        m_.emplace_back(p.var.shape());
        v_.emplace_back(p.var.shape());
    }
}

void Adam::step(double lr) {
    ++t_;
    double clip_scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double ss = 0.0;
        for (const auto& p : store_->params()) {
            if (!p.var.has_grad()) continue;
            for (double g : p.var.grad().data) ss += g * g;
        }
        const double norm = std::sqrt(ss);
        if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto& params = store_->params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto var = params[k].var;
        if (!var.has_grad()) continue;
        const auto& g = var.grad().data;
        auto& p = var.mutable_value().data;
        auto& m = m_[k].data;
        auto& v = v_[k].data;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * clip_scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        }
    }
}

void Adam::set_state(std::int64_t t, std::vector<ag::Tensor> m, std::vector<ag::Tensor> v) {
    const auto& params = store_->params();
    if (m.size() != params.size() || v.size() != params.size()) throw ConfigError("optimizer state size mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!(m[k].shape == params[k].var.shape()) || !(v[k].shape == params[k].var.shape())) {
            throw ConfigError("optimizer moment shape mismatch for '" + params[k].name + "'");
        }
    }
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace hdrgan
