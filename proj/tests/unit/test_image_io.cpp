#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hdrgan/error.hpp"
#include "hdrgan/image_io.hpp"
#include "hdrgan/log.hpp"
#include "test_util.hpp"

using namespace hdrgan;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string float_bytes(float v, bool big_endian) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(v);
    std::string s(4, '\0');
    for (int i = 0; i < 4; ++i) {
        const int shift = big_endian ? 8 * (3 - i) : 8 * i;
        s[i] = static_cast<char>((w >> shift) & 0xFF);
    }
    return s;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(Pfm, RoundTripIsBitExact) {
    testutil::TempDir dir("pfm");
    const HdrImage img = testutil::random_hdr(5, 3, 7, 1000.0);
    save_pfm(img, dir / "a.pfm");
    EXPECT_EQ(load_hdr(dir / "a.pfm"), img);
}

TEST(Pfm, BigEndianBottomUpFileDecodes) {
    testutil::TempDir dir("pfm");
    // 2x2; file rows are bottom-up, so the first stored row is image row 1
    std::string bytes = "PF\n2 2\n1.0\n";
    const float rows[2][6] = {{10, 11, 12, 13, 14, 15}, {0, 1, 2, 3, 4, 5}};
    for (const auto& row : rows)
        for (float v : row) bytes += float_bytes(v, true);
    write_bytes(dir / "be.pfm", bytes);
    HdrLoadInfo info;
    const HdrImage img = load_hdr(dir / "be.pfm", &info);
    EXPECT_EQ(info.format, HdrFormat::kPfm);
    EXPECT_EQ(img.at(0, 0, 0), 0.f);
    EXPECT_EQ(img.at(1, 0, 2), 5.f);
    EXPECT_EQ(img.at(0, 1, 0), 10.f);
    EXPECT_EQ(img.at(1, 1, 2), 15.f);
}

TEST(Pfm, LittleEndianMatchesWrittenLayout) {
    testutil::TempDir dir("pfm");
    const HdrImage img(1, 2, {1.f, 2.f, 3.f, 4.f, 5.f, 6.f});
    save_pfm(img, dir / "le.pfm");
    const std::string bytes = read_all(dir / "le.pfm");
    const std::string expect_header = "PF\n1 2\n-1.0\n";
    ASSERT_EQ(bytes.substr(0, expect_header.size()), expect_header);
    // bottom row (4,5,6) comes first
    EXPECT_EQ(bytes.substr(expect_header.size(), 4), float_bytes(4.f, false));
}

TEST(Pfm, GreyscaleIsRejected) {
    testutil::TempDir dir("pfm");
    write_bytes(dir / "g.pfm", "Pf\n1 1\n-1.0\n" + float_bytes(1.f, false));
    EXPECT_THROW(load_hdr(dir / "g.pfm"), FormatError);
}

TEST(Pfm, TruncatedPayloadIsFormatError) {
    testutil::TempDir dir("pfm");
    write_bytes(dir / "t.pfm", "PF\n2 2\n-1.0\n" + float_bytes(1.f, false));
    EXPECT_THROW(load_hdr(dir / "t.pfm"), FormatError);
}

TEST(Pfm, NanIsDataErrorNamingPixel) {
    testutil::TempDir dir("pfm");
    std::string bytes = "PF\n2 1\n-1.0\n";
    for (int i = 0; i < 6; ++i) bytes += float_bytes(i == 4 ? std::numeric_limits<float>::quiet_NaN() : 1.f, false);
    write_bytes(dir / "n.pfm", bytes);
    try {
        load_hdr(dir / "n.pfm");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("pixel index 1"), std::string::npos) << e.what();
    }
}

TEST(Pfm, NegativesClampWithWarning) {
    testutil::TempDir dir("pfm");
    std::string bytes = "PF\n1 1\n-1.0\n" + float_bytes(-2.f, false) + float_bytes(1.f, false) + float_bytes(0.5f, false);
    write_bytes(dir / "neg.pfm", bytes);
    std::vector<std::string> warnings;
    auto prev = set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
    HdrLoadInfo info;
    const HdrImage img = load_hdr(dir / "neg.pfm", &info);
    set_warning_handler(prev);
    EXPECT_EQ(img.at(0, 0, 0), 0.f);
    EXPECT_EQ(info.clamped_negatives, 1u);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Rgbe, UnitPixelEncoding) {
    const auto e = float_to_rgbe(1.f, 1.f, 1.f);
    EXPECT_EQ(e, (std::array<std::uint8_t, 4>{128, 128, 128, 129}));
    const auto f = rgbe_to_float({128, 128, 128, 129});
    EXPECT_EQ(f[0], 1.f);
    EXPECT_EQ(rgbe_to_float({0, 0, 0, 0})[1], 0.f);
    EXPECT_EQ(float_to_rgbe(0.f, 0.f, 0.f), (std::array<std::uint8_t, 4>{0, 0, 0, 0}));
}

TEST(Rgbe, RoundTripErrorBoundedByMantissaStep) {
    testutil::TempDir dir("rgbe");
    const HdrImage img = testutil::random_hdr(17, 9, 3, 50.0);
    save_rgbe(img, dir / "a.hdr");
    HdrLoadInfo info;
    const HdrImage back = load_hdr(dir / "a.hdr", &info);
    EXPECT_EQ(info.format, HdrFormat::kRgbe);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const float m = std::max({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
            for (int c = 0; c < 3; ++c) {
                // truncating 8-bit mantissa: error below one step of 2^(e-8) <= m/128
                EXPECT_LE(std::abs(back.at(x, y, c) - img.at(x, y, c)), m / 128.f) << x << "," << y;
                EXPECT_LE(back.at(x, y, c), img.at(x, y, c));
            }
        }
    }
}

TEST(Rgbe, DecodesRunLengthScanlines) {
    testutil::TempDir dir("rgbe");
    // 8x1 new-style RLE: every component is one run of 8 identical bytes
    std::string bytes = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n";
    bytes += std::string{2, 2, 0, 8};
    for (unsigned char v : {128, 64, 0, 130}) {
        bytes += static_cast<char>(128 + 8);
        bytes += static_cast<char>(v);
    }
    write_bytes(dir / "rle.hdr", bytes);
    const HdrImage img = load_hdr(dir / "rle.hdr");
    ASSERT_EQ(img.width(), 8);
    for (int x = 0; x < 8; ++x) {
        EXPECT_EQ(img.at(x, 0, 0), 2.f);  // 128 * 2^(130-136)
        EXPECT_EQ(img.at(x, 0, 1), 1.f);
        EXPECT_EQ(img.at(x, 0, 2), 0.f);
    }
}

TEST(Rgbe, LiteralRunsDecode) {
    testutil::TempDir dir("rgbe");
    std::string bytes = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n";
    bytes += std::string{2, 2, 0, 8};
    bytes += static_cast<char>(8);
    for (int x = 0; x < 8; ++x) bytes += static_cast<char>(16 * x);
    for (unsigned char v : {0, 0, 129}) {
        bytes += static_cast<char>(128 + 8);
        bytes += static_cast<char>(v);
    }
    write_bytes(dir / "lit.hdr", bytes);
    const HdrImage img = load_hdr(dir / "lit.hdr");
    for (int x = 0; x < 8; ++x) EXPECT_EQ(img.at(x, 0, 0), 16.f * x / 256.f * 2.f);
}

TEST(Rgbe, UnsupportedOrientationIsFormatError) {
    testutil::TempDir dir("rgbe");
    write_bytes(dir / "o.hdr", std::string("#?RADIANCE\n\n+Y 1 +X 1\n") + std::string{(char)128, (char)128, (char)128, (char)129});
    EXPECT_THROW(load_hdr(dir / "o.hdr"), FormatError);
}

TEST(HdrIo, SaveChoosesFormatByExtension) {
    testutil::TempDir dir("io");
    const HdrImage img = HdrImage::filled(2, 2, 1.f);
    save_hdr(img, dir / "x.hdr");
    save_hdr(img, dir / "x.pfm");
    EXPECT_EQ(read_all(dir / "x.hdr").substr(0, 2), "#?");
    EXPECT_EQ(read_all(dir / "x.pfm").substr(0, 2), "PF");
}

TEST(HdrIo, MissingFileIsIoError) { EXPECT_THROW(load_hdr("/nonexistent/none.pfm"), IoError); }

TEST(Ldr, PngRoundTripPreservesCodes) {
    testutil::TempDir dir("png");
    std::vector<float> px;
    for (int i = 0; i < 4 * 2 * 3; ++i) px.push_back(static_cast<float>((i * 37) % 256) / 255.f);
    const LdrImage img(4, 2, px);
    save_ldr(img, dir / "a.png");
    const LdrImage back = load_ldr(dir / "a.png");
    EXPECT_EQ(back.source_bit_depth(), 8);
    for (std::size_t i = 0; i < px.size(); ++i) EXPECT_EQ(back.pixels()[i], px[i]);
}

TEST(Ldr, JpegDecodesNearSourceColour) {
    const LdrImage img = load_ldr(fs::path(HDRGAN_FIXTURE_DIR) / "flat_200_100_50.jpg");
    ASSERT_EQ(img.width(), 16);
    ASSERT_EQ(img.height(), 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 16; ++x) {
            EXPECT_NEAR(img.at(x, y, 0) * 255.f, 200.f, 3.f);
            EXPECT_NEAR(img.at(x, y, 1) * 255.f, 100.f, 3.f);
            EXPECT_NEAR(img.at(x, y, 2) * 255.f, 50.f, 3.f);
        }
    }
}

TEST(Ldr, UnknownContainerIsFormatError) {
    testutil::TempDir dir("ldr");
    write_bytes(dir / "x.png", "not an image");
    EXPECT_THROW(load_ldr(dir / "x.png"), FormatError);
}

TEST(Ldr, GrayPngRejectsColour) {
    testutil::TempDir dir("ldr");
    save_ldr(LdrImage::filled(2, 2, 0.5f), dir / "c.png");
    EXPECT_THROW(load_gray_png(dir / "c.png"), FormatError);
    save_gray_png(GrayImage8{2, 1, {0, 255}}, dir / "g.png");
    const auto g = load_gray_png(dir / "g.png");
    EXPECT_EQ(g.values, (std::vector<std::uint8_t>{0, 255}));
}

TEST(Ldr, QuantizeRoundsToNearest) {
    EXPECT_EQ(quantize8(0.f), 0);
    EXPECT_EQ(quantize8(1.f), 255);
    EXPECT_EQ(quantize8(2.f), 255);
    EXPECT_EQ(quantize8(-1.f), 0);
    EXPECT_EQ(quantize8(0.5f / 255.f + 1e-4f), 1);
}
