#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "vesselsynth/cli.hpp"
#include "vesselsynth/dataio.hpp"
#include "vesselsynth/errors.hpp"
#include "vesselsynth/eval.hpp"
#include "vesselsynth/nn/checkpoint.hpp"
#include "vesselsynth/noisegen.hpp"
#include "vesselsynth/pipeline.hpp"
#include "vesselsynth/presets.hpp"
#include "vesselsynth/synthgen.hpp"

namespace py = pybind11;
using namespace vesselsynth;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_numpy(const Image2D<T>& img) {
  py::array_t<T> out({img.height, img.width});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size() * sizeof(T));
  return out;
}

template <typename T>
Image2D<T> from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a, const char* what) {
  if (a.ndim() != 2) throw ShapeError(std::string(what) + " must be a 2-D array");
  Image2D<T> img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size() * sizeof(T));
  return img;
}

GrayImage gray_in(const FloatArray& a) { return from_numpy<float>(a, "image"); }

Mask mask_in(const ByteArray& a) {
  Mask m = from_numpy<std::uint8_t>(a, "mask");
  for (auto& v : m.pixels) v = v ? 1 : 0;
  return m;
}

Mask fov_or_full(const std::optional<ByteArray>& fov, int w, int h) {
  return fov ? mask_in(*fov) : Mask(w, h, 1);
}

pipeline::PredictMode parse_mode(const std::string& mode) {
  if (mode == "valid") return pipeline::PredictMode::valid;
  if (mode == "mirror") return pipeline::PredictMode::mirror;
  throw ConfigError("mode must be 'valid' or 'mirror', got '" + mode + "'");
}

eval::ThresholdStrategy parse_strategy(std::optional<int> grid) {
  return grid ? eval::ThresholdStrategy::uniform_grid(*grid) : eval::ThresholdStrategy::all_distinct();
}

// Loaded network plus its training state, held by Python.
struct Model {
  nn::Checkpoint ckpt;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic vessel generation, a small segmentation network and metrics.";
  m.attr("__version__") = VESSELSYNTH_VERSION;

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<GenerationError>(m, "GenerationError", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<MetricError>(m, "MetricError", error.ptr());

  py::class_<synth::Point>(m, "Point")
      .def(py::init<int, int>(), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &synth::Point::x)
      .def_readwrite("y", &synth::Point::y)
      .def("__repr__", [](const synth::Point& p) {
        return "Point(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
      });

  py::class_<synth::GeneratorConfig>(m, "GeneratorConfig")
      .def(py::init<>())
      .def_readwrite("image_size", &synth::GeneratorConfig::image_size)
      .def_readwrite("circle_center", &synth::GeneratorConfig::circle_center)
      .def_readwrite("circle_radius", &synth::GeneratorConfig::circle_radius)
      .def_readwrite("max_nodes", &synth::GeneratorConfig::max_nodes)
      .def_readwrite("max_children", &synth::GeneratorConfig::max_children)
      .def_readwrite("mean_length", &synth::GeneratorConfig::mean_length)
      .def_readwrite("sigma_length", &synth::GeneratorConfig::sigma_length)
      .def_readwrite("branch_angle", &synth::GeneratorConfig::branch_angle)
      .def_readwrite("sigma_angle", &synth::GeneratorConfig::sigma_angle)
      .def_readwrite("line_width", &synth::GeneratorConfig::line_width)
      .def_readwrite("gray_lo", &synth::GeneratorConfig::gray_lo)
      .def_readwrite("gray_hi", &synth::GeneratorConfig::gray_hi)
      .def("validate", &synth::GeneratorConfig::validate);

  py::class_<noise::NoiseConfig>(m, "NoiseConfig")
      .def(py::init<>())
      .def_readwrite("noise_mean", &noise::NoiseConfig::noise_mean)
      .def_readwrite("noise_sigma", &noise::NoiseConfig::noise_sigma)
      .def_readwrite("max_patches", &noise::NoiseConfig::max_patches)
      .def_readwrite("patch_size", &noise::NoiseConfig::patch_size)
      .def_readwrite("frequency", &noise::NoiseConfig::frequency)
      .def_readwrite("amplitude", &noise::NoiseConfig::amplitude)
      .def_readwrite("bias_lo", &noise::NoiseConfig::bias_lo)
      .def_readwrite("bias_hi", &noise::NoiseConfig::bias_hi)
      .def("validate", &noise::NoiseConfig::validate, py::arg("image_size"));

  m.def(
      "preset",
      [](int variant) {
        const DatasetPreset p = dataset_preset(variant);
        return py::make_tuple(p.generator, p.noise);
      },
      py::arg("variant"), "(GeneratorConfig, NoiseConfig) for dataset variant 1 or 2.");

  m.def(
      "generate_raw",
      [](const synth::GeneratorConfig& cfg, std::uint64_t seed) {
        const synth::Sample s = synth::generate_raw(cfg, seed);
        return py::make_tuple(to_numpy(s.image), to_numpy(s.label));
      },
      py::arg("config"), py::arg("seed"), "Noise-free vessel tree: (image float32 HxW, label uint8 HxW).");

  m.def(
      "make_sample",
      [](const synth::GeneratorConfig& gen, const noise::NoiseConfig& noise, std::uint64_t seed) {
        const synth::Sample s = noise::make_sample(gen, noise, seed);
        return py::make_tuple(to_numpy(s.image), to_numpy(s.label));
      },
      py::arg("generator"), py::arg("noise"), py::arg("seed"), "Noisy training sample: (image, label).");

  m.def(
      "confusion",
      [](const ByteArray& predicted, const ByteArray& truth, const std::optional<ByteArray>& fov) {
        const Mask t = mask_in(truth);
        const auto c = eval::confusion(mask_in(predicted), t, fov_or_full(fov, t.width, t.height));
        py::dict d;
        d["tp"] = c.tp;
        d["fp"] = c.fp;
        d["tn"] = c.tn;
        d["fn"] = c.fn;
        return d;
      },
      py::arg("predicted"), py::arg("truth"), py::arg("fov") = py::none());

  m.def(
      "roc",
      [](const FloatArray& prob, const ByteArray& truth, const std::optional<ByteArray>& fov,
         std::optional<int> grid) {
        const Mask t = mask_in(truth);
        const auto curve = eval::roc(gray_in(prob), t, fov_or_full(fov, t.width, t.height), parse_strategy(grid));
        py::array_t<double> out({static_cast<py::ssize_t>(curve.points.size()), py::ssize_t{3}});
        auto r = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < curve.points.size(); ++i) {
          r(i, 0) = curve.points[i].threshold;
          r(i, 1) = curve.points[i].fpr;
          r(i, 2) = curve.points[i].tpr;
        }
        return out;
      },
      py::arg("prob"), py::arg("truth"), py::arg("fov") = py::none(), py::arg("grid") = py::none(),
      "ROC points as an (K, 3) array of (threshold, fpr, tpr).");

  m.def(
      "auc",
      [](const FloatArray& prob, const ByteArray& truth, const std::optional<ByteArray>& fov,
         std::optional<int> grid) {
        const Mask t = mask_in(truth);
        return eval::auc(eval::roc(gray_in(prob), t, fov_or_full(fov, t.width, t.height), parse_strategy(grid)));
      },
      py::arg("prob"), py::arg("truth"), py::arg("fov") = py::none(), py::arg("grid") = py::none());

  m.def(
      "evaluate",
      [](const FloatArray& prob, const ByteArray& truth, const std::optional<ByteArray>& fov, double threshold) {
        const Mask t = mask_in(truth);
        const auto r = eval::evaluate_image("", gray_in(prob), t, fov_or_full(fov, t.width, t.height), threshold);
        py::dict d;
        d["Sn"] = r.sn;
        d["Sp"] = r.sp;
        d["Acc"] = r.acc;
        d["AUC"] = r.auc;
        return d;
      },
      py::arg("prob"), py::arg("truth"), py::arg("fov") = py::none(), py::arg("threshold") = 0.5,
      "Sn, Sp, Acc and AUC; a metric is None when its denominator is empty.");

  py::class_<Model>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& path) { return Model{nn::load_checkpoint(path)}; },
          py::arg("path"))
      .def_property_readonly("iteration", [](const Model& s) { return s.ckpt.state.iteration; })
      .def(
          "output_size",
          [](const Model& s, int extent) { return s.ckpt.network.spec().output_extent(extent); },
          py::arg("extent"), "Valid-mode output extent for an input extent, or None when too small.")
      .def(
          "predict",
          [](Model& s, const FloatArray& image, const std::string& mode) {
            const GrayImage in = gray_in(image);
            GrayImage out;
            {
              py::gil_scoped_release release;
              out = pipeline::predict(s.ckpt.network, in, parse_mode(mode));
            }
            return to_numpy(out);
          },
          py::arg("image"), py::arg("mode") = "valid",
          "Vessel probability for a preprocessed gray image (vessels bright).");

  m.def("preprocess", [](const FloatArray& gray) { return to_numpy(pipeline::preprocess(gray_in(gray))); },
        py::arg("gray"), "Fundus gray image to network input (vessels bright).");

  m.def(
      "read_gray", [](const std::filesystem::path& p) { return to_numpy(io::read_gray(p)); }, py::arg("path"));
  m.def(
      "read_mask", [](const std::filesystem::path& p) { return to_numpy(io::read_mask(p)); }, py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in process: (exit code, stdout, stderr).");
}
