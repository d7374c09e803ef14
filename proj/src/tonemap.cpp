#include "hdrgan/tonemap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdrgan/error.hpp"

namespace hdrgan {

void validate(const MuLawParams& params) {
    if (!(params.mu > 0.0) || !std::isfinite(params.mu)) {
        throw ArgumentError("mu must be a positive finite number, got " + std::to_string(params.mu));
    }
}

double mu_tonemap(double h, const MuLawParams& params) {
    validate(params);
    if (!(h >= 0.0)) throw DomainError("mu_tonemap input must be non-negative, got " + std::to_string(h));
    return std::log1p(params.mu * h) / std::log1p(params.mu);
}

double mu_tonemap_derivative(double h, const MuLawParams& params) {
    validate(params);
    if (!(h >= 0.0)) throw DomainError("mu_tonemap input must be non-negative, got " + std::to_string(h));
    return params.mu / ((1.0 + params.mu * h) * std::log1p(params.mu));
}

double mu_inverse(double t, const MuLawParams& params) {
    validate(params);
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("mu_inverse input must be finite and >= 0, got " + std::to_string(t));
    return std::expm1(t * std::log1p(params.mu)) / params.mu;
}

std::vector<double> mu_tonemap(std::span<const double> h, const MuLawParams& params) {
    validate(params);
    const double denom = std::log1p(params.mu);
    std::vector<double> out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] >= 0.0)) throw DomainError("mu_tonemap input must be non-negative at index " + std::to_string(i));
        out[i] = std::log1p(params.mu * h[i]) / denom;
    }
    return out;
}

std::vector<double> mu_inverse(std::span<const double> t, const MuLawParams& params) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = mu_inverse(t[i], params);
    return out;
}

std::vector<double> mu_tonemap(const HdrImage& image, const MuLawParams& params) {
    std::vector<double> h(image.pixels().begin(), image.pixels().end());
    return mu_tonemap(std::span<const double>(h), params);
}

LdrImage tonemap_preview(const HdrImage& image, const MuLawParams& params) {
    const auto t = mu_tonemap(image, params);
    std::vector<float> px(t.size());
    std::transform(t.begin(), t.end(), px.begin(),
                   [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
    return LdrImage(image.width(), image.height(), std::move(px));
}

}  // namespace hdrgan
