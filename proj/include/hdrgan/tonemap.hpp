#pragma once

#include <span>
#include <vector>

#include "hdrgan/image.hpp"

namespace hdrgan {

struct MuLawParams {
    double mu = 5000.0;
};

// ln(1 + mu*h) / ln(1 + mu). Defined for h >= 0; values above 1 map above 1.
double mu_tonemap(double h, const MuLawParams& params = {});
double mu_tonemap_derivative(double h, const MuLawParams& params = {});
// Inverse of mu_tonemap, for any t >= 0.
double mu_inverse(double t, const MuLawParams& params = {});

std::vector<double> mu_tonemap(std::span<const double> h, const MuLawParams& params = {});
std::vector<double> mu_inverse(std::span<const double> t, const MuLawParams& params = {});

// Tonemapped copy of an HDR image as interleaved RGB doubles (not clipped).
std::vector<double> mu_tonemap(const HdrImage& image, const MuLawParams& params = {});

// Tonemapped image clipped to [0,1]; suitable for 8-bit previews.
LdrImage tonemap_preview(const HdrImage& image, const MuLawParams& params = {});

void validate(const MuLawParams& params);

}  // namespace hdrgan
