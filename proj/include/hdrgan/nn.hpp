#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdrgan/autograd.hpp"

namespace hdrgan {
class Rng;
}

namespace hdrgan::nn {

struct NamedParam {
    std::string name;
    ag::Var var;
};

// Ordered registry of trainable tensors. Order is the creation order and is
// what checkpoints and optimisers iterate over.
class ParamStore {
public:
    ag::Var add(const std::string& name, ag::Tensor init);

    const std::vector<NamedParam>& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }
    // Throws ConfigError for unknown names.
    const ag::Var& find(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    // Number of scalars, optionally restricted to names starting with prefix.
    std::size_t scalar_count(const std::string& prefix = "") const;

    void zero_grad();

    std::map<std::string, ag::Tensor> snapshot() const;
    // Copies values in; names and shapes must match exactly.
    void restore(const std::map<std::string, ag::Tensor>& values);

private:
    std::vector<NamedParam> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct InitScheme {
    double mean = 0.0;
    double stddev = 0.02;
};

// Every ".weight" tensor ~ Normal(mean, stddev), every ".bias" tensor zero.
// Draws follow the store order from a single Rng(seed).
void init_params(ParamStore& store, std::uint64_t seed, const InitScheme& scheme = {});

struct Conv2d {
    ag::Var weight;  // [cout, cin, k, k]
    ag::Var bias;    // [1, cout, 1, 1]
    int stride = 1;
    int pad = 0;

    static Conv2d create(ParamStore& store, const std::string& name, int cin, int cout, int kernel, int stride,
                         int pad, bool with_bias = true);
    ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, weight, bias, stride, pad); }
    int in_channels() const { return weight.shape().c; }
    int out_channels() const { return weight.shape().n; }
};

}  // namespace hdrgan::nn
