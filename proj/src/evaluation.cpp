#include "hdrgan/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hdrgan/checkpoint.hpp"
#include "hdrgan/error.hpp"
#include "hdrgan/inference.hpp"
#include "hdrgan/log.hpp"
#include "hdrgan/tonemap.hpp"

namespace hdrgan {

namespace fs = std::filesystem;

MetricImage MetricImage::from(const RgbBuffer& image) {
    MetricImage m{image.width(), image.height(), 3, {}};
    m.data.assign(image.pixels().begin(), image.pixels().end());
    return m;
}

MetricImage MetricImage::tonemapped(const HdrImage& image, double mu) {
    MetricImage m{image.width(), image.height(), 3, {}};
    m.data = mu_tonemap(image, MuLawParams{mu});
    return m;
}

namespace {

void check_same(const MetricImage& a, const MetricImage& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels || a.data.size() != b.data.size()) {
        throw ArgumentError("metric inputs differ in shape: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height) + "x" + std::to_string(b.channels));
    }
    if (a.data.empty()) throw ArgumentError("metric inputs are empty");
}

std::vector<double> gaussian_taps(int window, double sigma) {
    std::vector<double> k(window);
    const int r = window / 2;
    double s = 0.0;
    for (int i = 0; i < window; ++i) {
        k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
        s += k[i];
    }
    for (auto& v : k) v /= s;
    return k;
}

// Valid-region separable filter of one channel of a (w x h) plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError(where + ": bad number '" + s + "'");
    return v;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cells.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cells.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else {
            cells.back() += c;
        }
    }
    return cells;
}

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

double psnr(const MetricImage& a, const MetricImage& b) {
    check_same(a, b);
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double ssim(const MetricImage& a, const MetricImage& b, const SsimParams& p) {
    check_same(a, b);
    if (p.window < 1 || p.window % 2 == 0) throw ArgumentError("SSIM window must be a positive odd size");
    if (a.width < p.window || a.height < p.window) {
        throw ArgumentError("image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " is smaller than the " + std::to_string(p.window) + "x" + std::to_string(p.window) +
                            " SSIM window");
    }
    const auto k = gaussian_taps(p.window, p.sigma);
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    const int w = a.width, h = a.height;
    const std::size_t np = static_cast<std::size_t>(w) * h;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
        for (std::size_t i = 0; i < np; ++i) {
            x[i] = a.data[i * a.channels + c];
            y[i] = b.data[i * a.channels + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto ux = filter_valid(x, w, h, k), uy = filter_valid(y, w, h, k);
        const auto uxx = filter_valid(xx, w, h, k), uyy = filter_valid(yy, w, h, k), uxy = filter_valid(xy, w, h, k);
        double s = 0.0;
        for (std::size_t i = 0; i < ux.size(); ++i) {
            const double vx = uxx[i] - ux[i] * ux[i];
            const double vy = uyy[i] - uy[i] * uy[i];
            const double cov = uxy[i] - ux[i] * uy[i];
            s += ((2.0 * ux[i] * uy[i] + c1) * (2.0 * cov + c2)) /
                 ((ux[i] * ux[i] + uy[i] * uy[i] + c1) * (vx + vy + c2));
        }
        total += s / static_cast<double>(ux.size());
    }
    return total / a.channels;
}

bool operator==(const MetricRow& a, const MetricRow& b) {
    const bool vdp = a.hdr_vdp.has_value() == b.hdr_vdp.has_value() &&
                     (!a.hdr_vdp || same_double(*a.hdr_vdp, *b.hdr_vdp));
    return a.id == b.id && same_double(a.psnr_db, b.psnr_db) && same_double(a.ssim, b.ssim) && vdp &&
           a.excluded == b.excluded;
}

MetricStat summarize(const std::vector<double>& values) {
    MetricStat st;
    st.count = values.size();
    if (values.empty()) return st;
    double s = 0.0;
    for (double v : values) s += v;
    st.mean = s / values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(ss / values.size());
    return st;
}

MetricStat MetricReport::psnr_stat() const {
    std::vector<double> v;
    for (const auto& r : rows) if (!r.excluded) v.push_back(r.psnr_db);
    return summarize(v);
}

MetricStat MetricReport::ssim_stat() const {
    std::vector<double> v;
    for (const auto& r : rows) if (!r.excluded) v.push_back(r.ssim);
    return summarize(v);
}

std::size_t MetricReport::excluded_count() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.excluded ? 1 : 0;
    return n;
}

std::string write_report_csv(const MetricReport& report) {
    std::string out;
    for (const auto& [k, v] : report.meta) {
        if ((k + v).find_first_of("\r\n") != std::string::npos) throw ArgumentError("report metadata '" + k + "' spans lines");
        out += "#meta," + quote(k) + "," + quote(v) + "\n";
    }
    out += "id,psnr_db,ssim,hdr_vdp\n";
    for (const auto& r : report.rows) {
        if (r.id.find_first_of("\r\n") != std::string::npos) throw ArgumentError("row id spans lines");
        out += quote(r.id) + ",";
        out += r.excluded ? std::string("nan") : fmt(r.psnr_db);
        out += ",";
        out += r.excluded ? std::string("nan") : fmt(r.ssim);
        out += ",";
        if (r.hdr_vdp) out += fmt(*r.hdr_vdp);
        out += "\n";
    }
    const auto p = report.psnr_stat(), s = report.ssim_stat();
    out += "#aggregate,psnr_db," + fmt(p.mean) + "\xC2\xB1" + fmt(p.stddev) + "\n";
    out += "#aggregate,ssim," + fmt(s.mean) + "\xC2\xB1" + fmt(s.stddev) + "\n";
    out += "#excluded," + std::to_string(report.excluded_count()) + "\n";
    return out;
}

void write_report_csv(const MetricReport& report, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + path.string());
    out << write_report_csv(report);
    if (!out) throw IoError("write failed for " + path.string());
}

MetricReport parse_report_csv(const std::string& text) {
    MetricReport rep;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = "report line " + std::to_string(lineno);
        auto cells = split_csv(line);
        if (cells[0] == "#meta") {
            if (cells.size() != 3) throw FormatError(where + ": meta needs key and value");
            rep.meta[cells[1]] = cells[2];
        } else if (!cells[0].empty() && cells[0][0] == '#') {
            continue;  // aggregates are recomputed from the rows
        } else if (!header) {
            if (line != "id,psnr_db,ssim,hdr_vdp" && line != "id,psnr_db,ssim") {
                throw FormatError(where + ": expected the id,psnr_db,ssim header");
            }
            header = true;
        } else {
            if (cells.size() < 3 || cells.size() > 4) throw FormatError(where + ": expected 3 or 4 columns");
            MetricRow r;
            r.id = cells[0];
            r.psnr_db = parse_double(cells[1], where);
            r.ssim = parse_double(cells[2], where);
            if (cells.size() == 4 && !cells[3].empty()) r.hdr_vdp = parse_double(cells[3], where);
            r.excluded = !std::isfinite(r.psnr_db) || !std::isfinite(r.ssim);
            rep.rows.push_back(r);
        }
    }
    if (!header) throw FormatError("report has no header line");
    return rep;
}

MetricReport read_report_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_report_csv(ss.str());
}

std::string format_summary_table(const std::vector<std::pair<std::string, MetricReport>>& reports) {
    std::size_t wname = 7;
    for (const auto& [name, _] : reports) wname = std::max(wname, name.size());
    auto pad = [](std::string s, std::size_t n) {
        if (s.size() < n) s.append(n - s.size(), ' ');
        return s;
    };
    auto cell = [](const MetricStat& st, int prec) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f\xC2\xB1%.*f", prec, st.mean, prec, st.stddev);
        return std::string(buf);
    };
    std::string out = pad("Method", wname) + "  " + pad("PSNR(dB)", 14) + "  SSIM\n";
    for (const auto& [name, rep] : reports) {
        const std::string p = cell(rep.psnr_stat(), 2);
        // the ± sign is two bytes but one column
        out += pad(name, wname) + "  " + pad(p, 15) + "  " + cell(rep.ssim_stat(), 2) + "\n";
    }
    return out;
}

MetricReport evaluate(const SampleSource& source, const Predictor& predict, const EvalOptions& options) {
    MetricReport rep;
    rep.meta = options.meta;
    rep.meta["mu"] = fmt(options.mu);
    for (std::size_t i = 0; i < source.size(); ++i) {
        const PairedSample s = source.get(i);
        MetricRow row;
        row.id = s.id.empty() ? std::to_string(i) : s.id;
        try {
            const HdrImage pred = predict(s, resolve_mask(s, options.mask));
            const MetricImage a = MetricImage::tonemapped(pred, options.mu);
            const MetricImage b = MetricImage::tonemapped(s.hdr, options.mu);
            row.psnr_db = psnr(a, b);
            row.ssim = ssim(a, b);
            if (!std::isfinite(row.psnr_db) || !std::isfinite(row.ssim)) throw NumericError("non-finite metric");
        } catch (const DataError& e) {
            row.excluded = true;
        } catch (const NumericError& e) {
            row.excluded = true;
        }
        if (row.excluded) {
            row.psnr_db = std::nan("");
            row.ssim = std::nan("");
        }
        rep.rows.push_back(row);
    }
    if (const auto n = rep.excluded_count()) {
        warn(std::to_string(n) + " image(s) produced non-finite predictions and were excluded from the aggregates");
    }
    return rep;
}

MetricReport evaluate(const DatasetManifest& manifest, const fs::path& checkpoint, const EvalOptions& options,
                      int image_size) {
    std::string missing;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        for (const fs::path* p : {&e.ldr, &e.hdr}) {
            if (!fs::exists(*p)) missing += "\n  " + e.ldr.stem().string() + ": " + p->string();
        }
        if (e.mask && !fs::exists(*e.mask)) missing += "\n  " + e.ldr.stem().string() + ": " + e.mask->string();
    }
    if (!missing.empty()) throw IoError("missing evaluation files:" + missing);

    const Checkpoint ck = read_checkpoint(checkpoint);
    const auto gen = load_generator(ck);
    if (image_size <= 0) {
        if (!ck.meta.contains("config")) throw ConfigError("checkpoint carries no training resolution; pass a size");
        image_size = ck.meta.at("config").at("image_size").get<int>();
    }
    ManifestSource source(manifest, image_size);
    EvalOptions opts = options;
    opts.meta["checkpoint"] = checkpoint.filename().string();
    opts.meta["dataset"] = manifest.root.string();
    opts.meta["resolution"] = std::to_string(image_size);
    opts.meta["jpeg_decoder"] = "libjpeg defaults (islow DCT, fancy upsampling)";
    Predictor pred = [&](const PairedSample& s, const OEMask& m) { return infer(*gen, s.ldr, m).hdr; };
    return evaluate(source, pred, opts);
}

}  // namespace hdrgan
