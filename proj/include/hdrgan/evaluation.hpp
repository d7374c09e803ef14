#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdrgan/data_synth.hpp"
#include "hdrgan/image.hpp"
#include "hdrgan/networks.hpp"
#include "hdrgan/training.hpp"

namespace hdrgan {

// Interleaved double raster the metrics work on (normally a tonemapped image).
struct MetricImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    static MetricImage from(const RgbBuffer& image);
    static MetricImage tonemapped(const HdrImage& image, double mu = 5000.0);
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(1 / MSE) with peak 1; identical images give kPsnrCapDb (also the upper clamp).
double psnr(const MetricImage& a, const MetricImage& b);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

// Mean of the SSIM map over every fully contained Gaussian window, per channel, then
// averaged over channels.
double ssim(const MetricImage& a, const MetricImage& b, const SsimParams& params = {});

struct MetricRow {
    std::string id;
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::optional<double> hdr_vdp;  // reserved for externally computed values
    bool excluded = false;          // non-finite prediction; not aggregated

    friend bool operator==(const MetricRow& a, const MetricRow& b);
};

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::size_t count = 0;
};

struct MetricReport {
    std::map<std::string, std::string> meta;
    std::vector<MetricRow> rows;

    MetricStat psnr_stat() const;
    MetricStat ssim_stat() const;
    std::size_t excluded_count() const;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricStat summarize(const std::vector<double>& values);

// CSV: "#meta,key,value" lines, the header "id,psnr_db,ssim,hdr_vdp", one row per image,
// then "#aggregate,<metric>,<mean>±<std>" and "#excluded,<n>" trailers.
std::string write_report_csv(const MetricReport& report);
void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
MetricReport parse_report_csv(const std::string& text);
MetricReport read_report_csv(const std::filesystem::path& path);

// "PSNR mean±std  SSIM mean±std" table with one row per named report.
std::string format_summary_table(const std::vector<std::pair<std::string, MetricReport>>& reports);

// Produces an HDR prediction for a sample; the mask is the one resolved for it.
using Predictor = std::function<HdrImage(const PairedSample&, const OEMask&)>;

struct EvalOptions {
    double mu = 5000.0;
    MaskConfig mask;
    std::map<std::string, std::string> meta;
};

MetricReport evaluate(const SampleSource& source, const Predictor& predict, const EvalOptions& options = {});

// Loads every pair at image_size x image_size and runs the checkpoint's generator. Size 0 means
// the checkpoint's training resolution; the size used goes into the metadata. Missing files raise IoError listing all offending ids.
MetricReport evaluate(const DatasetManifest& manifest, const std::filesystem::path& checkpoint,
                      const EvalOptions& options, int image_size = 0);

}  // namespace hdrgan
