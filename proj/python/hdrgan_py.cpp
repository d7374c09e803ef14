// Python bindings. Images cross the boundary as float32 (H, W, 3) arrays, masks as uint8 (H, W).
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "hdrgan/data_synth.hpp"
#include "hdrgan/error.hpp"
#include "hdrgan/evaluation.hpp"
#include "hdrgan/image_io.hpp"
#include "hdrgan/inference.hpp"
#include "hdrgan/oemask.hpp"
#include "hdrgan/tonemap.hpp"
#include "hdrgan/training.hpp"

namespace py = pybind11;
using namespace hdrgan;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<float> rgb_pixels(const FloatArray& a, int* w, int* h) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ArgumentError("expected an array of shape (H, W, 3)");
    *h = static_cast<int>(a.shape(0));
    *w = static_cast<int>(a.shape(1));
    return {a.data(), a.data() + a.size()};
}

HdrImage to_hdr(const FloatArray& a) {
    int w, h;
    auto px = rgb_pixels(a, &w, &h);
    return HdrImage(w, h, std::move(px));
}

LdrImage to_ldr(const FloatArray& a) {
    int w, h;
    auto px = rgb_pixels(a, &w, &h);
    return LdrImage(w, h, std::move(px));
}

FloatArray to_array(const RgbBuffer& img) {
    FloatArray out({img.height(), img.width(), 3});
    std::memcpy(out.mutable_data(), img.pixels().data(), img.size() * sizeof(float));
    return out;
}

OEMask to_mask(const MaskArray& a) {
    if (a.ndim() != 2) throw ArgumentError("expected a mask of shape (H, W)");
    return OEMask(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                  std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

MaskArray to_array(const OEMask& m) {
    MaskArray out({m.height(), m.width()});
    std::memcpy(out.mutable_data(), m.values().data(), m.values().size());
    return out;
}

MetricImage to_metric(const DoubleArray& a) {
    if (a.ndim() != 3) throw ArgumentError("expected an array of shape (H, W, C)");
    return {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2)),
            std::vector<double>(a.data(), a.data() + a.size())};
}

DoubleArray map_doubles(const DoubleArray& a, double (*f)(double, const MuLawParams&), double mu) {
    DoubleArray out(std::vector<py::ssize_t>(a.shape(), a.shape() + a.ndim()));
    const MuLawParams p{mu};
    for (py::ssize_t i = 0; i < a.size(); ++i) out.mutable_data()[i] = f(a.data()[i], p);
    return out;
}

}  // namespace

PYBIND11_MODULE(_hdrgan, m) {
    m.doc() = "Single-image HDR reconstruction (C++ core)";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto numeric = py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", numeric.ptr());

    m.def("mu_tonemap", [](const DoubleArray& h, double mu) {
        return map_doubles(h, [](double v, const MuLawParams& p) { return mu_tonemap(v, p); }, mu);
    }, py::arg("h"), py::arg("mu") = 5000.0);
    m.def("mu_inverse", [](const DoubleArray& t, double mu) {
        return map_doubles(t, [](double v, const MuLawParams& p) { return mu_inverse(v, p); }, mu);
    }, py::arg("t"), py::arg("mu") = 5000.0);

    m.def("synthesize_ldr", [](const FloatArray& hdr, double t, double gamma) {
        ExposureModel em;
        em.gamma = gamma;
        return to_array(synthesize_ldr(to_hdr(hdr), t, em));
    }, py::arg("hdr"), py::arg("exposure_time"), py::arg("gamma") = 2.2);
    m.def("make_toy_scene", [](std::uint64_t seed, int size) { return to_array(make_toy_scene(seed, size)); },
          py::arg("seed"), py::arg("size") = 64);

    m.def("threshold_mask", [](const FloatArray& ldr, double tau) { return to_array(threshold_mask(to_ldr(ldr), tau)); },
          py::arg("ldr"), py::arg("tau") = kDefaultMaskTau);
    m.def("dilate_mask", [](const MaskArray& mask, int radius) { return to_array(dilate_mask(to_mask(mask), radius)); },
          py::arg("mask"), py::arg("radius"));

    m.def("psnr", [](const DoubleArray& a, const DoubleArray& b) { return psnr(to_metric(a), to_metric(b)); });
    m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) { return ssim(to_metric(a), to_metric(b)); });

    m.def("load_hdr", [](const std::filesystem::path& p) { return to_array(load_hdr(p)); });
    m.def("save_hdr", [](const FloatArray& a, const std::filesystem::path& p) { save_hdr(to_hdr(a), p); });
    m.def("load_ldr", [](const std::filesystem::path& p) { return to_array(load_ldr(p)); });
    m.def("save_ldr", [](const FloatArray& a, const std::filesystem::path& p) { save_ldr(to_ldr(a), p); });

    m.def("lr_at", [](int epoch, const std::string& config_json) {
        return lr_at(epoch, train_config_from_json(nlohmann::json::parse(config_json)));
    }, py::arg("epoch"), py::arg("config_json") = to_json(TrainConfig{}).dump());
    m.def("default_train_config", [] { return to_json(TrainConfig{}).dump(); },
          "Default training configuration as a JSON string.");

    // Training on in-memory pairs; returns (final checkpoint path, per-step losses).
    m.def("train", [](const std::vector<std::pair<FloatArray, FloatArray>>& pairs, const std::string& config_json,
                      const std::filesystem::path& out_dir) {
        std::vector<PairedSample> samples;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            samples.push_back({to_ldr(pairs[i].first), to_hdr(pairs[i].second), std::nullopt, std::to_string(i)});
        }
        const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(config_json));
        FitResult r;
        {
            py::gil_scoped_release release;
            r = fit(InMemorySource(std::move(samples)), cfg, out_dir);
        }
        py::list losses;
        for (const auto& rec : r.records) {
            py::dict d;
            d["step"] = rec.step;
            d["epoch"] = rec.epoch;
            d["loss_d"] = rec.loss_d;
            d["loss_g_gan"] = rec.loss_g_gan;
            d["loss_rec"] = rec.loss_rec;
            d["loss_perc"] = rec.loss_perc;
            d["loss_total"] = rec.loss_total;
            losses.append(d);
        }
        return py::make_tuple(r.final_checkpoint, losses);
    }, py::arg("pairs"), py::arg("config_json"), py::arg("out_dir"));

    py::class_<Generator>(m, "Generator")
        .def_static("load", [](const std::filesystem::path& ckpt) { return load_generator(read_checkpoint(ckpt)); })
        .def("infer", [](const Generator& g, const FloatArray& ldr, std::optional<MaskArray> mask, bool auto_pad) {
            const LdrImage img = to_ldr(ldr);
            const OEMask m = mask ? to_mask(*mask) : threshold_mask(img);
            InferOptions o;
            o.auto_pad = auto_pad;
            InferResult r;
            {
                py::gil_scoped_release release;
                r = infer(g, img, m, o);
            }
            py::dict d;
            d["linearized"] = to_array(r.linearized);
            d["corrected"] = to_array(r.corrected);
            d["hdr"] = to_array(r.hdr);
            return d;
        }, py::arg("ldr"), py::arg("mask") = py::none(), py::arg("auto_pad") = true);
}
