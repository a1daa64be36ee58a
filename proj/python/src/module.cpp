#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "uvmakeup/color/histogram.hpp"
#include "uvmakeup/core/error.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/fusion/fusion.hpp"
#include "uvmakeup/metrics/metrics.hpp"
#include "uvmakeup/pipeline/pipeline.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/uvgeom/geometry_provider.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace uvmakeup;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <int C>
py::array_t<float> to_array(const Raster<C>& r) {
  std::vector<py::ssize_t> shape{r.height(), r.width()};
  if (C > 1) shape.push_back(C);
  py::array_t<float> a(shape);
  std::copy(r.values().begin(), r.values().end(), a.mutable_data());
  return a;
}

template <typename R>
R from_array(const FloatArray& a, const char* what) {
  constexpr int C = R::channels;
  const bool ok = C == 1 ? (a.ndim() == 2 || (a.ndim() == 3 && a.shape(2) == 1)) : (a.ndim() == 3 && a.shape(2) == C);
  if (!ok)
    fail(ErrorCategory::shape_mismatch,
         std::string(what) + ": expected an array of shape (H, W" + (C == 1 ? "" : ", 3") + ")");
  R r(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + r.values().size(), r.values().begin());
  return r;
}

/// Models plus the content-keyed position-map store that backs their geometry.
struct PyModels {
  std::shared_ptr<uvgeom::PositionMapStore> store;
  pipeline::Models models;

  static PyModels load(const fs::path& dir) {
    PyModels m;
    m.store = std::make_shared<uvgeom::PositionMapStore>(std::make_shared<const uvgeom::SilhouetteFitProvider>());
    m.models = pipeline::load_models(dir, m.store);
    return m;
  }
};

py::dict intermediates_dict(const pipeline::Intermediates& im) {
  py::dict d;
  d["source_texture"] = to_array(im.source_texture);
  d["reference_texture"] = to_array(im.reference_texture);
  if (im.reference2_texture) d["reference2_texture"] = to_array(*im.reference2_texture);
  d["color_texture"] = to_array(im.color_texture);
  d["pattern_texture"] = to_array(im.pattern_texture);
  d["mask"] = to_array(im.mask);
  d["fused"] = to_array(im.fused);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UV-space makeup transfer";

  static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("category") = std::string(category_name(e.category()));
      inst.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.def("read_image", [](const fs::path& path) { return to_array(io::read_png(path)); }, py::arg("path"),
        "RGB PNG as float32 (H, W, 3) in [0, 1].");
  m.def(
      "write_image", [](const fs::path& path, const FloatArray& a) { io::write_png(path, from_array<Image>(a, "image")); },
      py::arg("path"), py::arg("image"));

  m.def(
      "histogram_match",
      [](const FloatArray& source, const FloatArray& reference, const FloatArray& mask) {
        const auto r = color::histogram_match(from_array<TextureMap>(source, "source"),
                                              from_array<TextureMap>(reference, "reference"),
                                              from_array<SoftMask>(mask, "mask"));
        return py::make_tuple(to_array(r.texture), r.empty_region);
      },
      py::arg("source"), py::arg("reference"), py::arg("mask"),
      "Returns (matched texture, empty_region).");

  m.def(
      "fuse",
      [](const FloatArray& t_ref, const FloatArray& t_color, const FloatArray& mask) {
        return to_array(fusion::fuse(from_array<TextureMap>(t_ref, "t_ref"), from_array<TextureMap>(t_color, "t_color"),
                                     from_array<PatternMask>(mask, "mask")));
      },
      py::arg("t_ref"), py::arg("t_color"), py::arg("mask"));
  m.def(
      "interpolate",
      [](const FloatArray& a, const FloatArray& b, double alpha) {
        return to_array(fusion::interpolate(from_array<TextureMap>(a, "a"), from_array<TextureMap>(b, "b"), alpha));
      },
      py::arg("a"), py::arg("b"), py::arg("alpha"));

  m.def(
      "miou",
      [](const FloatArray& gt, const FloatArray& pred) {
        return metrics::miou(from_array<PatternMask>(gt, "gt"), from_array<PatternMask>(pred, "pred"));
      },
      py::arg("gt"), py::arg("pred"));
  m.def(
      "ms_ssim",
      [](const FloatArray& a, const FloatArray& b) {
        return metrics::ms_ssim(from_array<Image>(a, "a"), from_array<Image>(b, "b"));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "make_faces",
      [](int n, std::uint64_t seed, bool makeup) {
        const auto set = synth::make_faces(n, seed, makeup);
        py::list out;
        for (const auto& f : set.faces) {
          py::dict d;
          d["id"] = f.id;
          d["image"] = to_array(f.image);
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("seed"), py::arg("makeup") = false);

  m.attr("regions") = std::vector<std::string>{"lips", "eyes", "skin"};

  py::class_<PyModels>(m, "Models")
      .def_static("load", &PyModels::load, py::arg("directory"))
      .def_property_readonly("has_color", [](const PyModels& p) { return p.models.color != nullptr; })
      .def_property_readonly("has_pattern", [](const PyModels& p) { return p.models.pattern != nullptr; })
      .def_property_readonly("uv_size", [](const PyModels& p) { return p.models.geometry->uv_size(); })
      .def(
          "add_sidecar",
          [](PyModels& p, const fs::path& image_path) {
            return p.store->add_sidecar(io::read_png(image_path), image_path);
          },
          py::arg("image_path"), "Registers the .uvpm position map stored next to an image file.")
      .def(
          "transfer",
          [](const PyModels& p, const FloatArray& source, const FloatArray& reference,
             std::optional<FloatArray> reference2, bool use_color, bool use_pattern, double alpha,
             std::vector<std::string> regions, std::uint64_t seed, bool intermediates) {
            const Image src = from_array<Image>(source, "source");
            const Image ref = from_array<Image>(reference, "reference");
            Image ref2;
            fusion::TransferRequest req;
            req.use_color = use_color;
            req.use_pattern = use_pattern;
            req.alpha = alpha;
            req.seed = seed;
            req.partial = !regions.empty();
            for (const auto& r : regions) req.regions.push_back(uvgeom::parse_region(r));
            pipeline::TransferInputs in;
            in.source = &src;
            in.reference = &ref;
            if (reference2) {
              ref2 = from_array<Image>(*reference2, "reference2");
              in.reference2 = &ref2;
            }
            in.keep_intermediates = intermediates;
            pipeline::TransferResult res;
            {
              py::gil_scoped_release release;
              res = pipeline::transfer(in, req, p.models);
            }
            py::dict d;
            d["output"] = to_array(res.output);
            d["pattern_detected"] = res.pattern_detected;
            d["timings_ms"] = res.timings_ms;
            if (res.intermediates) d["intermediates"] = intermediates_dict(*res.intermediates);
            return d;
          },
          py::arg("source"), py::arg("reference"), py::arg("reference2") = py::none(), py::arg("use_color") = true,
          py::arg("use_pattern") = true, py::arg("alpha") = 1.0, py::arg("regions") = std::vector<std::string>{},
          py::arg("seed") = 0, py::arg("intermediates") = false);
}
