#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <stdexcept>
#include <vector>

#include "polyamix/conformal.hpp"
#include "polyamix/posterior.hpp"
#include "polyamix/predictive.hpp"
#include "polyamix/segmentation.hpp"
#include "polyamix/simharness.hpp"

namespace py = pybind11;
using namespace polyamix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointSet to_points(const Array& a, int dim) {
  if (a.ndim() == 1 && dim == 1) {
    return PointSet(1, std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2 || a.shape(1) != dim) {
    throw std::invalid_argument("expected an (n, " + std::to_string(dim) + ") array");
  }
  return PointSet(dim, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const PointSet& p) {
  py::array_t<double> out({static_cast<py::ssize_t>(p.size()), static_cast<py::ssize_t>(p.dim())});
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int k = 0; k < p.dim(); ++k) *dst++ = p[i][static_cast<std::size_t>(k)];
  }
  return out;
}

py::array_t<double> evaluate(const Array& a, int dim, auto&& f) {
  const PointSet pts = to_points(a, dim);
  py::array_t<double> out(static_cast<py::ssize_t>(pts.size()));
  auto* dst = out.mutable_data();
  for (std::size_t i = 0; i < pts.size(); ++i) dst[i] = f(pts[i]);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mixtures of Polya trees over recursive dyadic segmentations.";

  py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);
  // Points outside the cube are bad values, not bad indices.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const std::out_of_range& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<Segmentation>(m, "Segmentation")
      .def(py::init<std::vector<int>, int>(), py::arg("dims"), py::arg("dimension"))
      .def_static("from_one_based", [](const std::vector<int>& d, int p) { return Segmentation::from_one_based(d, p); })
      .def_property_readonly("depth", &Segmentation::depth)
      .def_property_readonly("dimension", &Segmentation::dimension)
      .def_property_readonly("leaf_count", &Segmentation::leaf_count)
      .def("one_based", &Segmentation::one_based)
      .def("label", &Segmentation::label)
      .def("leaf_index", [](const Segmentation& s, const std::vector<double>& u) { return s.leaf_index(u); })
      .def("__repr__", [](const Segmentation& s) { return "Segmentation(" + s.label() + ")"; });

  py::class_<SegmentationFamily>(m, "SegmentationFamily")
      .def(py::init<std::vector<Segmentation>>())
      .def("__len__", &SegmentationFamily::size)
      .def("__getitem__",
           [](const SegmentationFamily& f, std::size_t i) {
             if (i >= f.size()) throw py::index_error();
             return f[i];
           })
      .def_property_readonly("dimension", &SegmentationFamily::dimension)
      .def_property_readonly("depth", &SegmentationFamily::depth);

  m.def(
      "balanced_family",
      [](int dimension, const std::map<int, int>& splits, const std::vector<int>& prefix) {
        return enumerate_balanced_family(dimension, splits, prefix);
      },
      py::arg("dimension"), py::arg("splits"), py::arg("prefix") = std::vector<int>{},
      "Every ordering of the split multiset {dim: count} (0-based dims) after `prefix`.");
  m.def("quantreg_family", &quantreg_family);

  py::class_<PosteriorModel>(m, "PosteriorModel")
      .def_static(
          "fit",
          [](const Array& data, const SegmentationFamily& family, double a0) {
            return PosteriorModel::fit(to_points(data, family.dimension()), family, a0);
          },
          py::arg("data"), py::arg("family"), py::arg("a0") = 1.0)
      .def_property_readonly("a0", &PosteriorModel::a0)
      .def_property_readonly("sample_size", &PosteriorModel::sample_size)
      .def_property_readonly("family", &PosteriorModel::family)
      .def_property_readonly("log_numerators", &PosteriorModel::log_numerators)
      .def_property_readonly("weights", &PosteriorModel::weights)
      .def("density", [](const PosteriorModel& pm, const Array& u) {
        return evaluate(u, pm.dimension(), [&](std::span<const double> p) { return pm.density(p); });
      })
      .def(
          "sample",
          [](const PosteriorModel& pm, std::size_t n, std::uint64_t seed) {
            return to_array(sample_posterior_predictive(pm, n, seed).points);
          },
          py::arg("n"), py::arg("seed") = 0, "Exact posterior predictive draws.");

  py::class_<MixtureApproximation>(m, "MixtureApproximation")
      .def_property_readonly("components", &MixtureApproximation::components)
      .def("density",
           [](const MixtureApproximation& mix, const Array& u) {
             return evaluate(u, mix.dimension(), [&](std::span<const double> p) { return mix.density(p); });
           })
      .def(
          "sample",
          [](const MixtureApproximation& mix, std::size_t n, std::uint64_t seed) {
            return to_array(sample_predictive(mix, n, seed).points);
          },
          py::arg("n"), py::arg("seed") = 0);

  m.def(
      "build_mixture",
      [](const PosteriorModel& pm, int draws, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return build_mixture(pm, draws, rng);
      },
      py::arg("model"), py::arg("draws_per_segmentation") = 50, py::arg("seed") = 0,
      "Beta-vector mixture; draws_per_segmentation = 0 gives the exact predictive.");

  py::enum_<ScoreSide>(m, "ScoreSide").value("below", ScoreSide::below).value("above", ScoreSide::above);

  py::class_<ConformalBand>(m, "ConformalBand")
      .def_readonly("alpha", &ConformalBand::alpha)
      .def_readonly("x_values", &ConformalBand::x_values)
      .def_readonly("y_grid", &ConformalBand::y_grid)
      .def_readonly("lower", &ConformalBand::lower)
      .def_readonly("upper", &ConformalBand::upper)
      .def_readonly("empty", &ConformalBand::empty);

  py::class_<ConformalPredictor>(m, "ConformalPredictor")
      .def(py::init([](const Array& train, const SegmentationFamily& family, double a0) {
             ConformalConfig config(family);
             config.a0 = a0;
             return ConformalPredictor(to_points(train, 2), std::move(config));
           }),
           py::arg("train"), py::arg("family"), py::arg("a0") = 1.0)
      .def("score", [](const ConformalPredictor& c, const std::vector<double>& u, ScoreSide s) { return c.score(u, s); })
      .def("pvalue",
           [](const ConformalPredictor& c, const std::vector<double>& u, ScoreSide s) { return c.pvalue(u, s); })
      .def(
          "band",
          [](const ConformalPredictor& c, const std::vector<double>& x, double alpha, std::size_t grid, bool interpolate) {
            return c.band(x, alpha, grid, interpolate ? EndpointMode::interpolated : EndpointMode::grid_point);
          },
          py::arg("x_values"), py::arg("alpha") = 0.05, py::arg("y_grid_size") = 0, py::arg("interpolate") = false);

  m.def("chi_square_sf", &chi_square_sf);
  m.def("kolmogorov_sf", &kolmogorov_sf);
}
