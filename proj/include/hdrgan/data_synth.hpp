#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdrgan/image.hpp"
#include "hdrgan/oemask.hpp"

namespace hdrgan {

// ldr = clip((hdr * t)^(1/gamma)) with unitless exposure multipliers t.
struct ExposureModel {
    double gamma = 2.2;
    std::vector<double> exposure_times{1.4142135623730951, 2.0, 4.0, 16.0};  // 2^0.5, 2^1, 2^2, 2^4

    void validate() const;
    // Builds exposure times 2^e from log2 exponents.
    static std::vector<double> from_log2(const std::vector<double>& exponents);
};

struct PairedSample {
    LdrImage ldr;
    HdrImage hdr;
    std::optional<OEMask> mask;
    std::string id;

    // Throws DataError if the dimensions of the members disagree.
    void validate() const;
};

LdrImage synthesize_ldr(const HdrImage& hdr, double exposure_time, const ExposureModel& model = {});

// One sample per exposure time; ids are "<base_id>_t<time>".
std::vector<PairedSample> build_exposure_stack(const HdrImage& hdr, const ExposureModel& model = {},
                                               const std::string& base_id = "hdr");

// Procedural scene: smooth base radiance in [0, 0.5] plus 1-3 Gaussian light blobs
// whose peak radiance lies in [2, 20]. Deterministic in the seed. size >= 16.
HdrImage make_toy_scene(std::uint64_t seed, int size);

struct ManifestEntry {
    std::filesystem::path ldr;
    std::filesystem::path hdr;
    std::optional<std::filesystem::path> mask;
};

// Text file with one "ldr<TAB>hdr[<TAB>mask]" line per pair. Relative paths are
// resolved against the manifest's directory; '#' lines are comments.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;
};

// With require_files, a missing referenced file raises IoError naming the entry.
DatasetManifest load_manifest(const std::filesystem::path& path, bool require_files = true);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path,
                   const std::vector<std::string>& comments = {});

// Random access over pairs.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual PairedSample get(std::size_t index) const = 0;
};

class InMemorySource final : public SampleSource {
public:
    explicit InMemorySource(std::vector<PairedSample> samples);
    std::size_t size() const override { return samples_.size(); }
    PairedSample get(std::size_t index) const override;

private:
    std::vector<PairedSample> samples_;
};

// Loads pairs lazily from disk; resize_to > 0 resizes every member to resize_to x resize_to.
class ManifestSource final : public SampleSource {
public:
    ManifestSource(DatasetManifest manifest, int resize_to);
    std::size_t size() const override { return manifest_.entries.size(); }
    PairedSample get(std::size_t index) const override;
    const DatasetManifest& manifest() const { return manifest_; }

private:
    DatasetManifest manifest_;
    int resize_to_;
};

// Delivers every sample of a source once, in the SplitMix64 Fisher-Yates order of the seed.
class SampleStream {
public:
    SampleStream(std::shared_ptr<const SampleSource> source, std::uint64_t shuffle_seed);
    std::optional<PairedSample> next();
    const std::vector<std::size_t>& order() const { return order_; }

private:
    std::shared_ptr<const SampleSource> source_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

SampleStream iterate(const DatasetManifest& manifest, int resize_to, std::uint64_t shuffle_seed);

}  // namespace hdrgan
