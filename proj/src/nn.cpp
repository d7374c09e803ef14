#include "hdrgan/nn.hpp"

#include "hdrgan/error.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan::nn {

ag::Var ParamStore::add(const std::string& name, ag::Tensor init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back({name, ag::parameter(std::move(init))});
    return params_.back().var;
}

const ag::Var& ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return params_[it->second].var;
}

std::size_t ParamStore::scalar_count(const std::string& prefix) const {
    std::size_t total = 0;
    for (const auto& p : params_) {
        if (p.name.rfind(prefix, 0) == 0) total += p.var.value().numel();
    }
    return total;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
}

std::map<std::string, ag::Tensor> ParamStore::snapshot() const {
    std::map<std::string, ag::Tensor> out;
    for (const auto& p : params_) out.emplace(p.name, p.var.value());
    return out;
}

void ParamStore::restore(const std::map<std::string, ag::Tensor>& values) {
    if (values.size() != params_.size()) {
        throw ConfigError("parameter set has " + std::to_string(values.size()) + " tensors, network expects " +
                          std::to_string(params_.size()));
    }
    for (auto& p : params_) {
        auto it = values.find(p.name);
        if (it == values.end()) throw ConfigError("missing parameter '" + p.name + "'");
        if (!(it->second.shape == p.var.shape())) {
            throw ConfigError("parameter '" + p.name + "' has shape " + it->second.shape.str() + ", network expects " +
                              p.var.shape().str());
        }
        p.var.mutable_value() = it->second;
    }
}

void init_params(ParamStore& store, std::uint64_t seed, const InitScheme& scheme) {
    Rng rng(seed);
    for (const auto& p : store.params()) {
        auto& data = const_cast<ag::Var&>(p.var).mutable_value().data;
        if (p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) {
            std::fill(data.begin(), data.end(), 0.0);
        } else {
            for (auto& v : data) v = scheme.mean + scheme.stddev * rng.normal();
        }
    }
}

Conv2d Conv2d::create(ParamStore& store, const std::string& name, int cin, int cout, int kernel, int stride, int pad,
                      bool with_bias) {
    if (cin <= 0 || cout <= 0 || kernel <= 0 || stride <= 0 || pad < 0) {
        throw ConfigError("invalid convolution geometry for '" + name + "'");
    }
    Conv2d c;
    c.weight = store.add(name + ".weight", ag::Tensor(ag::Shape{cout, cin, kernel, kernel}));
    if (with_bias) c.bias = store.add(name + ".bias", ag::Tensor(ag::Shape{1, cout, 1, 1}));
    c.stride = stride;
    c.pad = pad;
    return c;
}

}  // namespace hdrgan::nn
