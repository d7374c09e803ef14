#include "hdrgan/inference.hpp"

#include "hdrgan/error.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan {

int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    int k = i % period;
    if (k < 0) k += period;
    return k < n ? k : period - k;
}

LdrImage reflect_pad(const LdrImage& image, int pad_right, int pad_bottom) {
    const int w = image.width(), h = image.height();
    const int pw = w + pad_right, ph = h + pad_bottom;
    std::vector<float> px(static_cast<std::size_t>(pw) * ph * 3);
    for (int y = 0; y < ph; ++y) {
        const int sy = reflect_index(y, h);
        for (int x = 0; x < pw; ++x) {
            const int sx = reflect_index(x, w);
            for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * pw + x) * 3 + c] = image.at(sx, sy, c);
        }
    }
    return LdrImage(pw, ph, std::move(px), image.source_bit_depth());
}

OEMask reflect_pad(const OEMask& mask, int pad_right, int pad_bottom) {
    const int w = mask.width(), h = mask.height();
    const int pw = w + pad_right, ph = h + pad_bottom;
    std::vector<std::uint8_t> v(static_cast<std::size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) v[static_cast<std::size_t>(y) * pw + x] = mask.at(reflect_index(x, w), reflect_index(y, h));
    }
    return OEMask(pw, ph, std::move(v));
}

HdrImage crop(const HdrImage& image, int width, int height) {
    if (width > image.width() || height > image.height()) throw ArgumentError("crop larger than image");
    if (width == image.width() && height == image.height()) return image;
    std::vector<float> px(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] = image.at(x, y, c);
        }
    }
    return HdrImage(width, height, std::move(px));
}

InferResult infer(const Generator& gen, const LdrImage& ldr, const OEMask& mask, const InferOptions& options) {
    if (mask.width() != ldr.width() || mask.height() != ldr.height()) {
        throw DataError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                        " but the image is " + std::to_string(ldr.width()) + "x" + std::to_string(ldr.height()));
    }
    const int m = gen.config().size_multiple();
    InferResult r;
    if (options.auto_pad) {
        r.pad_right = (m - ldr.width() % m) % m;
        r.pad_bottom = (m - ldr.height() % m) % m;
    }
    const LdrImage in = (r.pad_right || r.pad_bottom) ? reflect_pad(ldr, r.pad_right, r.pad_bottom) : ldr;
    const OEMask a = (r.pad_right || r.pad_bottom) ? reflect_pad(mask, r.pad_right, r.pad_bottom) : mask;

    ag::NoGradGuard ng;
    Rng rng(options.seed);
    const GeneratorOutputs out =
        gen.forward(ag::constant(to_tensor(in)), to_tensor(a), options.stochastic, options.stochastic ? &rng : nullptr);
    const int w = ldr.width(), h = ldr.height();
    r.linearized = crop(to_hdr_image(out.linearized.value()), w, h);
    r.corrected = crop(to_hdr_image(out.corrected.value()), w, h);
    r.hdr = crop(to_hdr_image(out.hdr.value()), w, h);
    return r;
}

}  // namespace hdrgan
