#include "hdrgan/data_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hdrgan/error.hpp"
#include "hdrgan/image_io.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan {

namespace fs = std::filesystem;

void ExposureModel::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be positive");
    if (exposure_times.empty()) throw ArgumentError("exposure list must not be empty");
    for (double t : exposure_times) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ArgumentError("exposure times must be positive");
    }
}

std::vector<double> ExposureModel::from_log2(const std::vector<double>& exponents) {
    std::vector<double> out;
    out.reserve(exponents.size());
    for (double e : exponents) out.push_back(std::exp2(e));
    return out;
}

void PairedSample::validate() const {
    if (ldr.width() != hdr.width() || ldr.height() != hdr.height()) {
        throw DataError("pair '" + id + "': LDR is " + std::to_string(ldr.width()) + "x" + std::to_string(ldr.height()) +
                        " but HDR is " + std::to_string(hdr.width()) + "x" + std::to_string(hdr.height()));
    }
    if (mask && (mask->width() != ldr.width() || mask->height() != ldr.height())) {
        throw DataError("pair '" + id + "': mask dimensions differ from the LDR image");
    }
}

LdrImage synthesize_ldr(const HdrImage& hdr, double exposure_time, const ExposureModel& model) {
    if (!(exposure_time > 0.0) || !std::isfinite(exposure_time)) {
        throw ArgumentError("exposure time must be positive, got " + std::to_string(exposure_time));
    }
    if (!(model.gamma > 0.0)) throw ArgumentError("gamma must be positive");
    const double inv_gamma = 1.0 / model.gamma;
    std::vector<float> px(hdr.size());
    const auto src = hdr.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double z = std::pow(static_cast<double>(src[i]) * exposure_time, inv_gamma);
        px[i] = static_cast<float>(std::min(1.0, z));
    }
    return LdrImage(hdr.width(), hdr.height(), std::move(px));
}

std::vector<PairedSample> build_exposure_stack(const HdrImage& hdr, const ExposureModel& model,
                                               const std::string& base_id) {
    model.validate();
    std::vector<PairedSample> out;
    out.reserve(model.exposure_times.size());
    for (double t : model.exposure_times) {
        std::ostringstream id;
        id << base_id << "_t" << t;
        out.push_back({synthesize_ldr(hdr, t, model), hdr, std::nullopt, id.str()});
    }
    return out;
}

HdrImage make_toy_scene(std::uint64_t seed, int size) {
    if (size < 16) throw ArgumentError("toy scene size must be >= 16, got " + std::to_string(size));
    Rng rng(derive_seed(seed, 0x70E5CE4E));
    constexpr double kTwoPi = 2.0 * std::numbers::pi;

    // Low-frequency base: three random plane waves, squared so dark regions exist.
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves(3);
    double amp_sum = 0.0;
    for (auto& w : waves) {
        w = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(0.0, kTwoPi), rng.uniform(0.3, 1.0)};
        amp_sum += w.amp;
    }
    std::array<double, 3> tint{};
    for (auto& t : tint) t = rng.uniform(0.6, 1.0);

    struct Blob {
        double cx, cy, sigma, peak;
        std::array<double, 3> tint;
    };
    const int blob_count = 1 + static_cast<int>(rng.below(3));
    std::vector<Blob> blobs(blob_count);
    for (auto& b : blobs) {
        b.cx = std::floor(rng.uniform(0.15, 0.85) * size) + 0.5;
        b.cy = std::floor(rng.uniform(0.15, 0.85) * size) + 0.5;
        b.sigma = rng.uniform(0.04, 0.10) * size;
        b.peak = rng.uniform(2.0, 20.0);
        const int brightest = static_cast<int>(rng.below(3));
        for (int c = 0; c < 3; ++c) b.tint[c] = c == brightest ? 1.0 : rng.uniform(0.8, 1.0);
    }

    std::vector<float> px(static_cast<std::size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double s = 0.0;
            for (const auto& w : waves) s += w.amp * std::cos(kTwoPi * (w.fx * u + w.fy * v) + w.phase);
            s = 0.5 + 0.5 * s / amp_sum;  // [0, 1]
            const double base = 0.5 * (0.01 + 0.99 * s * s);
            for (int c = 0; c < 3; ++c) {
                double h = base * tint[c];
                for (const auto& b : blobs) {
                    const double dx = x + 0.5 - b.cx, dy = y + 0.5 - b.cy;
                    h += b.peak * b.tint[c] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
                }
                px[(static_cast<std::size_t>(y) * size + x) * 3 + c] = static_cast<float>(h);
            }
        }
    }
    return HdrImage(size, size, std::move(px));
}

DatasetManifest load_manifest(const fs::path& path, bool require_files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    DatasetManifest m;
    m.root = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : m.root / p; };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() < 2 || fields.size() > 3) {
            throw FormatError("manifest '" + path.string() + "' line " + std::to_string(line_no) +
                              ": expected ldr<TAB>hdr[<TAB>mask]");
        }
        ManifestEntry e{resolve(fields[0]), resolve(fields[1]), std::nullopt};
        if (fields.size() == 3 && !fields[2].empty()) e.mask = resolve(fields[2]);
        const std::size_t index = m.entries.size();
        for (const fs::path* p : {&e.ldr, &e.hdr, e.mask ? &*e.mask : nullptr}) {
            if (require_files && p && !fs::exists(*p)) {
                throw IoError("manifest entry " + std::to_string(index) + ": missing file '" + p->string() + "'");
            }
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path, const std::vector<std::string>& comments) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    for (const auto& c : comments) out << "# " << c << '\n';
    const fs::path base = path.parent_path();
    auto rel = [&](const fs::path& p) {
        const fs::path r = p.lexically_relative(base);
        return (r.empty() ? p : r).generic_string();
    };
    for (const auto& e : manifest.entries) {
        out << rel(e.ldr) << '\t' << rel(e.hdr);
        if (e.mask) out << '\t' << rel(*e.mask);
        out << '\n';
    }
    if (!out) throw IoError("write failure on manifest '" + path.string() + "'");
}

InMemorySource::InMemorySource(std::vector<PairedSample> samples) : samples_(std::move(samples)) {
    for (const auto& s : samples_) s.validate();
}

PairedSample InMemorySource::get(std::size_t index) const {
    if (index >= samples_.size()) throw ArgumentError("sample index out of range");
    return samples_[index];
}

ManifestSource::ManifestSource(DatasetManifest manifest, int resize_to)
    : manifest_(std::move(manifest)), resize_to_(resize_to) {
    if (resize_to < 0) throw ArgumentError("resize target must be >= 0");
}

PairedSample ManifestSource::get(std::size_t index) const {
    if (index >= manifest_.entries.size()) throw ArgumentError("manifest index out of range");
    const auto& e = manifest_.entries[index];
    PairedSample s;
    s.id = e.ldr.stem().string();
    try {
        s.ldr = load_ldr(e.ldr);
        s.hdr = load_hdr(e.hdr);
        if (e.mask) {
            const auto gray = load_gray_png(*e.mask);
            s.mask = file_mask(*e.mask, gray.width, gray.height);
        }
    } catch (const IoError& err) {
        throw IoError("manifest entry " + std::to_string(index) + ": " + err.what());
    }
    if (resize_to_ > 0) {
        s.ldr = resize(s.ldr, resize_to_, resize_to_);
        s.hdr = resize(s.hdr, resize_to_, resize_to_);
        if (s.mask) s.mask = resize_mask(*s.mask, resize_to_, resize_to_);
    }
    try {
        s.validate();
    } catch (const DataError& err) {
        throw DataError("manifest entry " + std::to_string(index) + ": " + err.what());
    }
    return s;
}

SampleStream::SampleStream(std::shared_ptr<const SampleSource> source, std::uint64_t shuffle_seed)
    : source_(std::move(source)), order_(shuffled_indices(source_->size(), shuffle_seed)) {}

std::optional<PairedSample> SampleStream::next() {
    if (pos_ >= order_.size()) return std::nullopt;
    return source_->get(order_[pos_++]);
}

SampleStream iterate(const DatasetManifest& manifest, int resize_to, std::uint64_t shuffle_seed) {
    return SampleStream(std::make_shared<ManifestSource>(manifest, resize_to), shuffle_seed);
}

}  // namespace hdrgan
