#pragma once

#include <cstdint>
#include <vector>

#include "hdrgan/autograd.hpp"
#include "hdrgan/nn.hpp"

namespace hdrgan {

struct AdamConfig {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

// Adam with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Parameters without an accumulated gradient are left untouched.
class Adam {
public:
    Adam(nn::ParamStore& store, AdamConfig cfg);

    void step(double lr);
    std::int64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }

    // Moment buffers in store order, for checkpointing.
    const std::vector<ag::Tensor>& first_moments() const noexcept { return m_; }
    const std::vector<ag::Tensor>& second_moments() const noexcept { return v_; }
    void set_state(std::int64_t t, std::vector<ag::Tensor> m, std::vector<ag::Tensor> v);

private:
    nn::ParamStore* store_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<ag::Tensor> m_, v_;
};

}  // namespace hdrgan
