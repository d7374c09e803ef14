#include "hdrgan/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdrgan/error.hpp"

namespace hdrgan {

namespace {

void check_dims(int width, int height, std::size_t count) {
    if (width <= 0 || height <= 0) {
        throw ArgumentError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    if (count != static_cast<std::size_t>(width) * height * RgbBuffer::kChannels) {
        throw ArgumentError("pixel buffer holds " + std::to_string(count) + " values, expected " +
                            std::to_string(static_cast<std::size_t>(width) * height * 3));
    }
}

std::string pixel_name(std::size_t index, int width) {
    const std::size_t pixel = index / 3;
    return "pixel (" + std::to_string(pixel % width) + ", " + std::to_string(pixel / width) +
           ") channel " + std::to_string(index % 3);
}

}  // namespace

RgbBuffer::RgbBuffer(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width_, height_, pixels_.size());
}

HdrImage::HdrImage(int width, int height, std::vector<float> pixels)
    : RgbBuffer(width, height, std::move(pixels)) {
    for (std::size_t i = 0; i < pixels_.size(); ++i) {
        const float v = pixels_[i];
        if (!std::isfinite(v)) {
            throw DataError("non-finite HDR value at " + pixel_name(i, width_));
        }
        if (v < 0.0f) {
            throw DataError("negative HDR value at " + pixel_name(i, width_));
        }
    }
}

HdrImage HdrImage::filled(int width, int height, float value) {
    return HdrImage(width, height,
                    std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                           std::max(height, 0) * kChannels,
                                       value));
}

LdrImage::LdrImage(int width, int height, std::vector<float> pixels, int source_bit_depth)
    : RgbBuffer(width, height, std::move(pixels)), source_bit_depth_(source_bit_depth) {
    for (std::size_t i = 0; i < pixels_.size(); ++i) {
        const float v = pixels_[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("LDR value outside [0,1] at " + pixel_name(i, width_));
        }
    }
}

LdrImage LdrImage::filled(int width, int height, float value) {
    return LdrImage(width, height,
                    std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                           std::max(height, 0) * kChannels,
                                       value));
}

std::vector<float> resize_bilinear(std::span<const float> src, int width, int height, int channels,
                                   int target_width, int target_height) {
    if (target_width <= 0 || target_height <= 0) {
        throw ArgumentError("resize target must be positive, got " + std::to_string(target_width) +
                            "x" + std::to_string(target_height));
    }
    std::vector<float> out(static_cast<std::size_t>(target_width) * target_height * channels);
    const double sx = static_cast<double>(width) / target_width;
    const double sy = static_cast<double>(height) / target_height;

    auto sample_axis = [](double pos, int extent, int& i0, int& i1, double& frac) {
        pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
        i0 = static_cast<int>(std::floor(pos));
        i1 = std::min(i0 + 1, extent - 1);
        frac = pos - i0;
    };

    for (int y = 0; y < target_height; ++y) {
        int y0, y1;
        double fy;
        sample_axis((y + 0.5) * sy - 0.5, height, y0, y1, fy);
        for (int x = 0; x < target_width; ++x) {
            int x0, x1;
            double fx;
            sample_axis((x + 0.5) * sx - 0.5, width, x0, x1, fx);
            for (int c = 0; c < channels; ++c) {
                auto px = [&](int xx, int yy) {
                    return static_cast<double>(
                        src[(static_cast<std::size_t>(yy) * width + xx) * channels + c]);
                };
                const double top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
                const double bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
                out[(static_cast<std::size_t>(y) * target_width + x) * channels + c] =
                    static_cast<float>(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    return out;
}

HdrImage resize(const HdrImage& image, int target_width, int target_height) {
    auto px = resize_bilinear(image.pixels(), image.width(), image.height(), 3, target_width,
                              target_height);
    // Convex weights cannot produce negatives; clamp rounding residue anyway.
    for (auto& v : px) v = std::max(v, 0.0f);
    return HdrImage(target_width, target_height, std::move(px));
}

LdrImage resize(const LdrImage& image, int target_width, int target_height) {
    auto px = resize_bilinear(image.pixels(), image.width(), image.height(), 3, target_width,
                              target_height);
    for (auto& v : px) v = std::clamp(v, 0.0f, 1.0f);
    return LdrImage(target_width, target_height, std::move(px), image.source_bit_depth());
}

}  // namespace hdrgan
