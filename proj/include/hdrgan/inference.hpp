#pragma once

#include <cstdint>

#include "hdrgan/image.hpp"
#include "hdrgan/networks.hpp"
#include "hdrgan/oemask.hpp"

namespace hdrgan {

struct InferOptions {
    // Reflect-pad right/bottom to the next multiple the generator needs, crop afterwards.
    bool auto_pad = true;
    // Keep decoder dropout on (training-time noise); off gives deterministic output.
    bool stochastic = false;
    std::uint64_t seed = 0;
};

struct InferResult {
    HdrImage linearized;
    HdrImage corrected;
    HdrImage hdr;
    int pad_right = 0;
    int pad_bottom = 0;
};

// Runs the generator on one LDR image with the given mask (same size as the image).
// Without auto_pad, sizes that are not a multiple of 2^(depth-1) raise ArgumentError.
InferResult infer(const Generator& gen, const LdrImage& ldr, const OEMask& mask, const InferOptions& options = {});

// Reflection (without edge repetition) index for padding; valid for any i >= 0.
int reflect_index(int i, int n) noexcept;
LdrImage reflect_pad(const LdrImage& image, int pad_right, int pad_bottom);
OEMask reflect_pad(const OEMask& mask, int pad_right, int pad_bottom);
HdrImage crop(const HdrImage& image, int width, int height);

}  // namespace hdrgan
