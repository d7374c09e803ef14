#include "hdrgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "hdrgan/error.hpp"
#include "hdrgan/log.hpp"

namespace hdrgan {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    return bytes;
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

bool starts_with(const std::vector<std::uint8_t>& bytes, std::string_view magic) {
    return bytes.size() >= magic.size() &&
           std::equal(magic.begin(), magic.end(), bytes.begin(),
                      [](char m, std::uint8_t b) { return static_cast<std::uint8_t>(m) == b; });
}

// Cursor over an in-memory file for the text headers of PFM and RGBE.
class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, const fs::path& path)
        : bytes_(bytes), path_(path) {}

    std::string line() {
        std::string out;
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') out.push_back(static_cast<char>(bytes_[pos_++]));
        if (pos_ >= bytes_.size()) throw FormatError("truncated header in '" + path_.string() + "'");
        ++pos_;
        return out;
    }

    // Whitespace-separated token; consumes exactly one trailing whitespace byte.
    std::string token() {
        while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
        if (out.empty() || pos_ >= bytes_.size()) {
            throw FormatError("truncated header in '" + path_.string() + "'");
        }
        ++pos_;
        return out;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::uint8_t next() {
        if (pos_ >= bytes_.size()) throw FormatError("truncated pixel data in '" + path_.string() + "'");
        return bytes_[pos_++];
    }
    const std::uint8_t* data() const { return bytes_.data() + pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

int parse_int(const std::string& s, const fs::path& path) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw FormatError("bad integer '" + s + "' in header of '" + path.string() + "'");
    }
}

// Clamps negatives, rejects NaN/Inf, and wraps the result.
HdrImage finish_hdr(int width, int height, std::vector<float> px, const fs::path& path,
                    HdrLoadInfo* info) {
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!std::isfinite(px[i])) {
            throw DataError("non-finite value in '" + path.string() + "' at pixel index " +
                            std::to_string(i / 3) + " channel " + std::to_string(i % 3));
        }
        if (px[i] < 0.0f) {
            px[i] = 0.0f;
            ++clamped;
        }
    }
    if (clamped > 0) {
        warn("clamped " + std::to_string(clamped) + " negative values to 0 in '" + path.string() + "'");
    }
    if (info) info->clamped_negatives = clamped;
    return HdrImage(width, height, std::move(px));
}

HdrImage read_pfm(const std::vector<std::uint8_t>& bytes, const fs::path& path, HdrLoadInfo* info) {
    ByteReader r(bytes, path);
    const std::string magic = r.token();
    if (magic == "Pf") throw FormatError("'" + path.string() + "' is a greyscale PFM; 3 channels required");
    if (magic != "PF") throw FormatError("bad PFM magic in '" + path.string() + "'");
    const int width = parse_int(r.token(), path);
    const int height = parse_int(r.token(), path);
    if (width <= 0 || height <= 0) throw FormatError("bad PFM dimensions in '" + path.string() + "'");
    double scale = 0.0;
    {
        const std::string s = r.token();
        try {
            scale = std::stod(s);
        } catch (const std::logic_error&) {
            throw FormatError("bad PFM scale '" + s + "' in '" + path.string() + "'");
        }
    }
    if (scale == 0.0) throw FormatError("PFM scale must be non-zero in '" + path.string() + "'");
    const bool little = scale < 0.0;
    const std::size_t count = static_cast<std::size_t>(width) * height * 3;
    if (r.remaining() < count * 4) throw FormatError("truncated PFM payload in '" + path.string() + "'");

    std::vector<float> px(count);
    const std::uint8_t* src = r.data();
    const bool swap = little != (std::endian::native == std::endian::little);
    for (int row = 0; row < height; ++row) {
        // Rows are stored bottom-up.
        const std::size_t dst_row = static_cast<std::size_t>(height - 1 - row) * width * 3;
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * 3; ++i) {
            std::uint32_t word;
            std::memcpy(&word, src + (static_cast<std::size_t>(row) * width * 3 + i) * 4, 4);
            if (swap) word = __builtin_bswap32(word);
            px[dst_row + i] = std::bit_cast<float>(word);
        }
    }
    return finish_hdr(width, height, std::move(px), path, info);
}

void decode_rgbe_scanline(ByteReader& r, int width, std::vector<std::uint8_t>& scan, const fs::path& path) {
    scan.assign(static_cast<std::size_t>(width) * 4, 0);
    const std::uint8_t b0 = r.next(), b1 = r.next(), b2 = r.next(), b3 = r.next();
    const bool rle = width >= 8 && width < 32768 && b0 == 2 && b1 == 2 && (b2 & 0x80) == 0;
    if (!rle) {
        scan[0] = b0;
        scan[1] = b1;
        scan[2] = b2;
        scan[3] = b3;
        for (std::size_t i = 4; i < scan.size(); ++i) scan[i] = r.next();
        return;
    }
    if (((static_cast<int>(b2) << 8) | b3) != width) {
        throw FormatError("RGBE scanline width mismatch in '" + path.string() + "'");
    }
    for (int comp = 0; comp < 4; ++comp) {
        int x = 0;
        while (x < width) {
            int count = r.next();
            if (count > 128) {
                count -= 128;
                if (x + count > width) throw FormatError("bad RGBE run in '" + path.string() + "'");
                const std::uint8_t v = r.next();
                for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(x++) * 4 + comp] = v;
            } else {
                if (count == 0 || x + count > width) {
                    throw FormatError("bad RGBE literal run in '" + path.string() + "'");
                }
                for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(x++) * 4 + comp] = r.next();
            }
        }
    }
}

HdrImage read_rgbe(const std::vector<std::uint8_t>& bytes, const fs::path& path, HdrLoadInfo* info) {
    ByteReader r(bytes, path);
    r.line();  // "#?RADIANCE" or "#?RGBE"
    bool format_ok = true;
    for (;;) {
        const std::string l = r.line();
        if (l.empty()) break;
        if (l.rfind("FORMAT=", 0) == 0) format_ok = (l == "FORMAT=32-bit_rle_rgbe");
    }
    if (!format_ok) throw FormatError("unsupported RGBE pixel format in '" + path.string() + "'");
    std::istringstream res(r.line());
    std::string ya, xa;
    int height = 0, width = 0;
    res >> ya >> height >> xa >> width;
    if (ya != "-Y" || xa != "+X" || width <= 0 || height <= 0) {
        throw FormatError("unsupported RGBE orientation/resolution line in '" + path.string() + "'");
    }
    std::vector<float> px(static_cast<std::size_t>(width) * height * 3);
    std::vector<std::uint8_t> scan;
    for (int y = 0; y < height; ++y) {
        decode_rgbe_scanline(r, width, scan, path);
        for (int x = 0; x < width; ++x) {
            const std::size_t s = static_cast<std::size_t>(x) * 4;
            const auto rgb = rgbe_to_float({scan[s], scan[s + 1], scan[s + 2], scan[s + 3]});
            std::copy(rgb.begin(), rgb.end(), px.begin() + (static_cast<std::size_t>(y) * width + x) * 3);
        }
    }
    return finish_hdr(width, height, std::move(px), path, info);
}

enum class LdrKind { kPng, kJpeg, kUnknown };

LdrKind sniff_ldr(const std::vector<std::uint8_t>& bytes) {
    if (starts_with(bytes, "\x89PNG\r\n\x1a\n")) return LdrKind::kPng;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return LdrKind::kJpeg;
    return LdrKind::kUnknown;
}

struct PngImageGuard {
    png_image image{};
    PngImageGuard() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImageGuard() { png_image_free(&image); }
};

std::vector<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path,
                                     png_uint_32 format, int& width, int& height, bool require_gray) {
    PngImageGuard g;
    if (!png_image_begin_read_from_memory(&g.image, bytes.data(), bytes.size())) {
        throw FormatError("cannot decode PNG '" + path.string() + "': " + g.image.message);
    }
    if (require_gray && (g.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA))) {
        throw FormatError("'" + path.string() + "' is not a single-channel PNG");
    }
    g.image.format = format;
    width = static_cast<int>(g.image.width);
    height = static_cast<int>(g.image.height);
    std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(g.image));
    if (!png_image_finish_read(&g.image, nullptr, out.data(), 0, nullptr)) {
        throw FormatError("cannot decode PNG '" + path.string() + "': " + g.image.message);
    }
    return out;
}

void encode_png(const std::uint8_t* data, int width, int height, png_uint_32 format, const fs::path& path) {
    PngImageGuard g;
    g.image.width = static_cast<png_uint_32>(width);
    g.image.height = static_cast<png_uint_32>(height);
    g.image.format = format;
    if (!png_image_write_to_file(&g.image, path.string().c_str(), 0, data, 0, nullptr)) {
        throw IoError("cannot write PNG '" + path.string() + "': " + g.image.message);
    }
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

extern "C" void jpeg_error_exit_longjmp(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Only trivially destructible locals live between setjmp and longjmp here.
bool decode_jpeg_raw(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>& out, int& width,
                     int& height, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit_longjmp;
    if (setjmp(err.jump)) {
        std::memcpy(message, err.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    out.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

}  // namespace

std::uint8_t quantize8(float v) noexcept {
    const float c = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    return static_cast<std::uint8_t>(c);
}

std::array<std::uint8_t, 4> float_to_rgbe(float r, float g, float b) {
    const float v = std::max({r, g, b});
    if (v < 1e-32f) return {0, 0, 0, 0};
    int e = 0;
    const float scale = std::frexp(v, &e) * 256.0f / v;
    return {static_cast<std::uint8_t>(r * scale), static_cast<std::uint8_t>(g * scale),
            static_cast<std::uint8_t>(b * scale), static_cast<std::uint8_t>(e + 128)};
}

std::array<float, 3> rgbe_to_float(const std::array<std::uint8_t, 4>& rgbe) {
    if (rgbe[3] == 0) return {0.0f, 0.0f, 0.0f};
    const float f = std::ldexp(1.0f, static_cast<int>(rgbe[3]) - (128 + 8));
    return {rgbe[0] * f, rgbe[1] * f, rgbe[2] * f};
}

HdrImage load_hdr(const fs::path& path, HdrLoadInfo* info) {
    const auto bytes = read_file(path);
    if (starts_with(bytes, "PF") || starts_with(bytes, "Pf")) {
        if (info) info->format = HdrFormat::kPfm;
        return read_pfm(bytes, path, info);
    }
    if (starts_with(bytes, "#?")) {
        if (info) info->format = HdrFormat::kRgbe;
        return read_rgbe(bytes, path, info);
    }
    throw FormatError("'" + path.string() + "' is neither PFM nor Radiance RGBE");
}

void save_pfm(const HdrImage& image, const fs::path& path) {
    std::string out = "PF\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n-1.0\n";
    const std::size_t header = out.size();
    const std::size_t row_floats = static_cast<std::size_t>(image.width()) * 3;
    out.resize(header + image.size() * 4);
    const auto px = image.pixels();
    for (int row = 0; row < image.height(); ++row) {
        const std::size_t src_row = static_cast<std::size_t>(image.height() - 1 - row) * row_floats;
        for (std::size_t i = 0; i < row_floats; ++i) {
            std::uint32_t word = std::bit_cast<std::uint32_t>(px[src_row + i]);
            if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
            std::memcpy(out.data() + header + (static_cast<std::size_t>(row) * row_floats + i) * 4, &word, 4);
        }
    }
    write_file(path, out);
}

void save_rgbe(const HdrImage& image, const fs::path& path) {
    std::string out = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(image.height()) + " +X " +
                      std::to_string(image.width()) + "\n";
    out.reserve(out.size() + image.size() / 3 * 4);
    const auto px = image.pixels();
    for (std::size_t i = 0; i < px.size(); i += 3) {
        const auto e = float_to_rgbe(px[i], px[i + 1], px[i + 2]);
        out.append(reinterpret_cast<const char*>(e.data()), 4);
    }
    write_file(path, out);
}

void save_hdr(const HdrImage& image, const fs::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".hdr" || ext == ".pic") {
        save_rgbe(image, path);
    } else {
        save_pfm(image, path);
    }
}

LdrImage load_ldr(const fs::path& path) {
    const auto bytes = read_file(path);
    int width = 0, height = 0;
    std::vector<std::uint8_t> codes;
    switch (sniff_ldr(bytes)) {
        case LdrKind::kPng:
            codes = decode_png(bytes, path, PNG_FORMAT_RGB, width, height, false);
            break;
        case LdrKind::kJpeg: {
            char message[JMSG_LENGTH_MAX] = {};
            if (!decode_jpeg_raw(bytes, codes, width, height, message)) {
                throw FormatError("cannot decode JPEG '" + path.string() + "': " + message);
            }
            break;
        }
        case LdrKind::kUnknown:
            throw FormatError("'" + path.string() + "' is not a PNG or JPEG image");
    }
    std::vector<float> px(codes.size());
    std::transform(codes.begin(), codes.end(), px.begin(),
                   [](std::uint8_t c) { return static_cast<float>(c) / 255.0f; });
    return LdrImage(width, height, std::move(px), 8);
}

void save_ldr(const LdrImage& image, const fs::path& path) {
    std::vector<std::uint8_t> codes(image.size());
    std::transform(image.pixels().begin(), image.pixels().end(), codes.begin(), quantize8);
    encode_png(codes.data(), image.width(), image.height(), PNG_FORMAT_RGB, path);
}

GrayImage8 load_gray_png(const fs::path& path) {
    const auto bytes = read_file(path);
    if (sniff_ldr(bytes) != LdrKind::kPng) throw FormatError("'" + path.string() + "' is not a PNG image");
    GrayImage8 out;
    out.values = decode_png(bytes, path, PNG_FORMAT_GRAY, out.width, out.height, true);
    return out;
}

void save_gray_png(const GrayImage8& image, const fs::path& path) {
    if (image.values.size() != static_cast<std::size_t>(image.width) * image.height || image.width <= 0) {
        throw ArgumentError("grey image buffer does not match its dimensions");
    }
    encode_png(image.values.data(), image.width, image.height, PNG_FORMAT_GRAY, path);
}

}  // namespace hdrgan
