#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hdrgan/image.hpp"

namespace hdrgan {

enum class HdrFormat { kPfm, kRgbe };

struct HdrLoadInfo {
    HdrFormat format = HdrFormat::kPfm;
    std::size_t clamped_negatives = 0;
};

// Reads PFM or Radiance RGBE, detected from the magic bytes. Negative samples are
// clamped to zero and reported through warn(); NaN/Inf raise DataError.
HdrImage load_hdr(const std::filesystem::path& path, HdrLoadInfo* info = nullptr);

// Format chosen from the extension: ".hdr"/".pic" write RGBE, anything else PFM.
void save_hdr(const HdrImage& image, const std::filesystem::path& path);
void save_pfm(const HdrImage& image, const std::filesystem::path& path);
void save_rgbe(const HdrImage& image, const std::filesystem::path& path);

// Encode/decode one shared-exponent pixel (Ward's convention, no half-LSB offset).
std::array<std::uint8_t, 4> float_to_rgbe(float r, float g, float b);
std::array<float, 3> rgbe_to_float(const std::array<std::uint8_t, 4>& rgbe);

// PNG or JPEG input; 8-bit codes c map to c/255.
LdrImage load_ldr(const std::filesystem::path& path);
// PNG output, codes round(v*255).
void save_ldr(const LdrImage& image, const std::filesystem::path& path);

struct GrayImage8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;
};

// Single-channel PNG access used by mask files. Colour PNGs raise FormatError.
GrayImage8 load_gray_png(const std::filesystem::path& path);
void save_gray_png(const GrayImage8& image, const std::filesystem::path& path);

std::uint8_t quantize8(float v) noexcept;

}  // namespace hdrgan
