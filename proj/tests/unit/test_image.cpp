#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hdrgan/error.hpp"
#include "hdrgan/image.hpp"
#include "test_util.hpp"

using namespace hdrgan;

TEST(Image, HdrRejectsNegativeAndNonFinite) {
    EXPECT_THROW(HdrImage(1, 1, {0.f, -0.1f, 0.f}), DataError);
    EXPECT_THROW(HdrImage(1, 1, {0.f, std::numeric_limits<float>::quiet_NaN(), 0.f}), DataError);
    EXPECT_THROW(HdrImage(1, 1, {std::numeric_limits<float>::infinity(), 0.f, 0.f}), DataError);
    EXPECT_NO_THROW(HdrImage(1, 1, {0.f, 1e6f, 3.f}));
}

TEST(Image, ErrorNamesThePixel) {
    try {
        HdrImage(2, 2, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -1.f, 0});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("(1, 1)"), std::string::npos) << e.what();
    }
}

TEST(Image, LdrRangeAndSizeChecks) {
    EXPECT_THROW(LdrImage(1, 1, {0.f, 1.01f, 0.f}), DataError);
    EXPECT_THROW(LdrImage(2, 1, {0.f, 0.f, 0.f}), ArgumentError);
    EXPECT_NO_THROW(LdrImage(1, 1, {0.f, 1.f, 0.5f}));
}

TEST(Image, ResizeToSameSizeIsIdentity) {
    const HdrImage img = testutil::random_hdr(7, 5, 1);
    EXPECT_EQ(resize(img, 7, 5), img);
}

TEST(Image, HalvingAveragesTwoByTwoBlocks) {
    const HdrImage img = testutil::random_hdr(8, 6, 2);
    const HdrImage half = resize(img, 4, 3);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double avg = (static_cast<double>(img.at(2 * x, 2 * y, c)) + img.at(2 * x + 1, 2 * y, c) +
                                    img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c)) / 4.0;
                EXPECT_NEAR(half.at(x, y, c), avg, 1e-6);
            }
        }
    }
}

TEST(Image, ConstantImageStaysConstant) {
    const LdrImage img = LdrImage::filled(5, 9, 0.375f);
    const LdrImage r = resize(img, 13, 4);
    for (float v : r.pixels()) EXPECT_FLOAT_EQ(v, 0.375f);
}

TEST(Image, UpsampledRampIsLinearInside) {
    std::vector<float> px;
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) px.push_back(static_cast<float>(x));
    const HdrImage img(4, 2, px);
    const HdrImage up = resize(img, 8, 2);
    // output x maps to source (x + 0.5) / 2 - 0.5, clamped to [0, 3]
    for (int x = 0; x < 8; ++x) {
        const double expect = std::clamp((x + 0.5) / 2.0 - 0.5, 0.0, 3.0);
        EXPECT_NEAR(up.at(x, 1, 0), expect, 1e-6);
    }
}

TEST(Image, NonPositiveTargetIsArgumentError) {
    const HdrImage img = testutil::random_hdr(4, 4, 3);
    EXPECT_THROW(resize(img, 0, 4), ArgumentError);
    EXPECT_THROW(resize(img, 4, -1), ArgumentError);
}
