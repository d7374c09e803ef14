#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hdrgan/image.hpp"

namespace hdrgan {

// Binary over-exposure map: 1 marks a saturated pixel, 0 an under/normally exposed one.
class OEMask {
public:
    OEMask() = default;
    // Throws DataError if any value is not 0 or 1.
    OEMask(int width, int height, std::vector<std::uint8_t> values);

    static OEMask zeros(int width, int height);
    static OEMask ones(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t at(int x, int y) const noexcept {
        return values_[static_cast<std::size_t>(y) * width_ + x];
    }
    const std::vector<std::uint8_t>& values() const noexcept { return values_; }

    std::size_t count() const noexcept;
    // Fraction of pixels marked over-exposed.
    double coverage() const noexcept;

    friend bool operator==(const OEMask&, const OEMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> values_;
};

inline constexpr double kDefaultMaskTau = 250.0 / 255.0;

// alpha = 1 where max(R,G,B) >= tau. tau must lie in (0,1).
OEMask threshold_mask(const LdrImage& ldr, double tau = kDefaultMaskTau);

// Single-channel PNG where codes >= 128 mean over-exposed.
OEMask file_mask(const std::filesystem::path& path, int expected_width, int expected_height);

// Square structuring element of side 2*radius+1.
OEMask dilate_mask(const OEMask& mask, int radius);

// Nearest-neighbour resampling, for keeping supplied masks aligned with resized pairs.
OEMask resize_mask(const OEMask& mask, int target_width, int target_height);

// Writes 255 for over-exposed pixels, 0 elsewhere.
void save_mask(const OEMask& mask, const std::filesystem::path& path);

// Deterministic source of masks for an LDR input.
class MaskProvider {
public:
    virtual ~MaskProvider() = default;
    virtual std::string name() const = 0;
    virtual OEMask mask_for(const LdrImage& ldr) const = 0;
};

class ThresholdMaskProvider final : public MaskProvider {
public:
    explicit ThresholdMaskProvider(double tau = kDefaultMaskTau, int dilate_radius = 0);
    std::string name() const override { return "threshold"; }
    OEMask mask_for(const LdrImage& ldr) const override;

    double tau() const noexcept { return tau_; }

private:
    double tau_;
    int dilate_radius_;
};

// Returns the same externally produced mask file for every input; dimensions are checked.
class FileMaskProvider final : public MaskProvider {
public:
    explicit FileMaskProvider(std::filesystem::path path, int dilate_radius = 0);
    std::string name() const override { return "file"; }
    OEMask mask_for(const LdrImage& ldr) const override;

private:
    std::filesystem::path path_;
    int dilate_radius_;
};

// Always-empty or always-full masks; useful for isolating the correction branch.
class ConstantMaskProvider final : public MaskProvider {
public:
    explicit ConstantMaskProvider(bool over_exposed) : value_(over_exposed) {}
    std::string name() const override { return value_ ? "ones" : "zeros"; }
    OEMask mask_for(const LdrImage& ldr) const override;

private:
    bool value_;
};

}  // namespace hdrgan
