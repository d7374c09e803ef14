#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hdrgan {

// Interleaved 3-channel float raster, row-major, top row first.
class RgbBuffer {
public:
    static constexpr int kChannels = 3;

    RgbBuffer() = default;
    RgbBuffer(int width, int height, std::vector<float> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    float at(int x, int y, int c) const noexcept {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
    }
    std::span<const float> pixels() const noexcept { return pixels_; }

    friend bool operator==(const RgbBuffer&, const RgbBuffer&) = default;

protected:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> pixels_;
};

// Linear scene radiance. Values are finite and >= 0, unbounded above.
class HdrImage : public RgbBuffer {
public:
    HdrImage() = default;
    // Throws DataError naming the first offending pixel.
    HdrImage(int width, int height, std::vector<float> pixels);

    static HdrImage filled(int width, int height, float value);
};

// Display-referred image with values in [0, 1].
class LdrImage : public RgbBuffer {
public:
    LdrImage() = default;
    LdrImage(int width, int height, std::vector<float> pixels, int source_bit_depth = 0);

    static LdrImage filled(int width, int height, float value);

    // 8 when decoded from an 8-bit file, 0 when synthesized in memory.
    int source_bit_depth() const noexcept { return source_bit_depth_; }

    friend bool operator==(const LdrImage& a, const LdrImage& b) {
        return static_cast<const RgbBuffer&>(a) == static_cast<const RgbBuffer&>(b);
    }

private:
    int source_bit_depth_ = 0;
};

// Bilinear resampling with half-pixel-centred sampling and edge clamping.
HdrImage resize(const HdrImage& image, int target_width, int target_height);
LdrImage resize(const LdrImage& image, int target_width, int target_height);

// Raw planar resampler shared by the typed overloads and the mask code.
std::vector<float> resize_bilinear(std::span<const float> src, int width, int height, int channels,
                                   int target_width, int target_height);

}  // namespace hdrgan
