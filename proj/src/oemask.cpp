#include "hdrgan/oemask.hpp"

#include <algorithm>
#include <numeric>

#include "hdrgan/error.hpp"
#include "hdrgan/image_io.hpp"

namespace hdrgan {

OEMask::OEMask(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width_ <= 0 || height_ <= 0) throw ArgumentError("mask dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width_) * height_) {
        throw ArgumentError("mask buffer does not match its dimensions");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] > 1) throw DataError("mask value at index " + std::to_string(i) + " is not binary");
    }
}

OEMask OEMask::zeros(int width, int height) {
    return OEMask(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0));
}

OEMask OEMask::ones(int width, int height) {
    return OEMask(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 1));
}

std::size_t OEMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

double OEMask::coverage() const noexcept {
    return values_.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(values_.size());
}

OEMask threshold_mask(const LdrImage& ldr, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("mask threshold tau must lie in (0,1), got " + std::to_string(tau));
    const auto px = ldr.pixels();
    std::vector<std::uint8_t> v(static_cast<std::size_t>(ldr.width()) * ldr.height());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const float m = std::max({px[i * 3], px[i * 3 + 1], px[i * 3 + 2]});
        v[i] = static_cast<double>(m) >= tau ? 1 : 0;
    }
    return OEMask(ldr.width(), ldr.height(), std::move(v));
}

OEMask file_mask(const std::filesystem::path& path, int expected_width, int expected_height) {
    const auto gray = load_gray_png(path);
    if (gray.width != expected_width || gray.height != expected_height) {
        throw DataError("mask '" + path.string() + "' is " + std::to_string(gray.width) + "x" +
                        std::to_string(gray.height) + ", expected " + std::to_string(expected_width) + "x" +
                        std::to_string(expected_height));
    }
    std::vector<std::uint8_t> v(gray.values.size());
    std::transform(gray.values.begin(), gray.values.end(), v.begin(),
                   [](std::uint8_t c) { return static_cast<std::uint8_t>(c >= 128 ? 1 : 0); });
    return OEMask(gray.width, gray.height, std::move(v));
}

OEMask dilate_mask(const OEMask& mask, int radius) {
    if (radius < 0) throw ArgumentError("dilation radius must be non-negative");
    if (radius == 0) return mask;
    const int w = mask.width(), h = mask.height();
    // Separable max filter: rows then columns.
    std::vector<std::uint8_t> rows(mask.values().size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t m = 0;
            for (int dx = std::max(0, x - radius); dx <= std::min(w - 1, x + radius) && !m; ++dx) m = mask.at(dx, y);
            rows[static_cast<std::size_t>(y) * w + x] = m;
        }
    }
    std::vector<std::uint8_t> out(rows.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t m = 0;
            for (int dy = std::max(0, y - radius); dy <= std::min(h - 1, y + radius) && !m; ++dy) {
                m = rows[static_cast<std::size_t>(dy) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = m;
        }
    }
    return OEMask(w, h, std::move(out));
}

OEMask resize_mask(const OEMask& mask, int target_width, int target_height) {
    if (target_width <= 0 || target_height <= 0) throw ArgumentError("resize target must be positive");
    if (target_width == mask.width() && target_height == mask.height()) return mask;
    std::vector<std::uint8_t> v(static_cast<std::size_t>(target_width) * target_height);
    for (int y = 0; y < target_height; ++y) {
        const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / target_height));
        for (int x = 0; x < target_width; ++x) {
            const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / target_width));
            v[static_cast<std::size_t>(y) * target_width + x] = mask.at(sx, sy);
        }
    }
    return OEMask(target_width, target_height, std::move(v));
}

void save_mask(const OEMask& mask, const std::filesystem::path& path) {
    GrayImage8 g{mask.width(), mask.height(), {}};
    g.values.resize(mask.values().size());
    std::transform(mask.values().begin(), mask.values().end(), g.values.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    save_gray_png(g, path);
}

ThresholdMaskProvider::ThresholdMaskProvider(double tau, int dilate_radius)
    : tau_(tau), dilate_radius_(dilate_radius) {
    if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("mask threshold tau must lie in (0,1)");
    if (dilate_radius < 0) throw ArgumentError("dilation radius must be non-negative");
}

OEMask ThresholdMaskProvider::mask_for(const LdrImage& ldr) const {
    return dilate_mask(threshold_mask(ldr, tau_), dilate_radius_);
}

FileMaskProvider::FileMaskProvider(std::filesystem::path path, int dilate_radius)
    : path_(std::move(path)), dilate_radius_(dilate_radius) {
    if (dilate_radius < 0) throw ArgumentError("dilation radius must be non-negative");
}

OEMask FileMaskProvider::mask_for(const LdrImage& ldr) const {
    return dilate_mask(file_mask(path_, ldr.width(), ldr.height()), dilate_radius_);
}

OEMask ConstantMaskProvider::mask_for(const LdrImage& ldr) const {
    return value_ ? OEMask::ones(ldr.width(), ldr.height()) : OEMask::zeros(ldr.width(), ldr.height());
}

}  // namespace hdrgan
