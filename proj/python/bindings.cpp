#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sgpplace/benchmark.hpp"
#include "sgpplace/environment.hpp"
#include "sgpplace/errors.hpp"
#include "sgpplace/fov.hpp"
#include "sgpplace/gp.hpp"
#include "sgpplace/io.hpp"
#include "sgpplace/kernels.hpp"
#include "sgpplace/metrics.hpp"
#include "sgpplace/placement.hpp"
#include "sgpplace/svgp.hpp"

namespace py = pybind11;
using namespace sgpplace;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

Dataset make_dataset(const Mat& inputs, const std::optional<Vec>& labels) {
  Dataset d{inputs, labels};
  d.validate();
  return d;
}

// JSON crosses the boundary as text so Python sees plain dicts via json.loads.
std::string dump(const Json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sensor placement with sparse Gaussian processes";
  m.attr("__version__") = "0.1.0";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);
  py::register_exception<EnvironmentDegenerate>(m, "EnvironmentDegenerate", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::enum_<KernelFamily>(m, "KernelFamily").value("rbf", KernelFamily::rbf).value("matern32", KernelFamily::matern32);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init<>())
      .def_static("rbf", &KernelSpec::rbf, py::arg("variance"), py::arg("lengthscale"), py::arg("noise_variance"))
      .def_static("matern32", &KernelSpec::matern32, py::arg("variance"), py::arg("lengthscale"),
                  py::arg("noise_variance"))
      .def_readwrite("family", &KernelSpec::family)
      .def_readwrite("variance", &KernelSpec::variance)
      .def_readwrite("lengthscale", &KernelSpec::lengthscale)
      .def_readwrite("noise_variance", &KernelSpec::noise_variance)
      .def("validate", &KernelSpec::validate)
      .def("__repr__", [](const KernelSpec& k) { return "KernelSpec(" + dump(kernel_to_json(k)) + ")"; });

  m.def("kernel_matrix", &kernel_matrix, py::arg("spec"), py::arg("a"), py::arg("b"));

  py::class_<Environment>(m, "Environment")
      .def(py::init<>())
      .def_static("box", &Environment::box, py::arg("low"), py::arg("high"))
      .def_static("unit_square", &Environment::unit_square)
      .def_readwrite("bounds", &Environment::bounds)
      .def_readwrite("obstacles", &Environment::obstacles)
      .def_readwrite("candidates", &Environment::candidates)
      .def_property_readonly("dim", &Environment::dim)
      .def("feasible", &Environment::feasible, py::arg("p"))
      .def("validate", &Environment::validate);
  m.def("sample_uniform", &sample_uniform, py::arg("env"), py::arg("n"), py::arg("seed"));
  m.def("stand_in_grid", &stand_in_grid, py::arg("env"), py::arg("size"), py::arg("seed"));
  m.def(
      "synth_field",
      [](const Environment& env, const KernelSpec& spec, const Mat& grid, std::uint64_t seed) {
        return *synth_field(env, spec, grid, seed).labels;
      },
      py::arg("env"), py::arg("spec"), py::arg("grid"), py::arg("seed"),
      "Draws a GP sample at the grid points.");

  m.def(
      "gp_posterior",
      [](const KernelSpec& spec, const Mat& x, const Vec& y, const Mat& test) {
        GaussianPrediction p = gp_posterior(spec, make_dataset(x, y), test);
        return py::make_tuple(p.mean, p.covariance);
      },
      py::arg("spec"), py::arg("x"), py::arg("y"), py::arg("test"), "Returns (mean, covariance) of the latent field.");
  m.def(
      "gp_log_marginal", [](const KernelSpec& spec, const Mat& x, const Vec& y) { return gp_log_marginal(spec, make_dataset(x, y)); },
      py::arg("spec"), py::arg("x"), py::arg("y"));
  m.def(
      "fit_kernel",
      [](const Mat& x, const Vec& y, const KernelSpec& init, double learning_rate, int max_iters) {
        FitOptions opts;
        opts.learning_rate = learning_rate;
        opts.max_iters = max_iters;
        return fit_kernel_hyperparams(make_dataset(x, y), init, opts).spec;
      },
      py::arg("x"), py::arg("y"), py::arg("init"), py::arg("learning_rate") = 1e-2, py::arg("max_iters") = 3000);

  m.def(
      "svgp_elbo",
      [](const KernelSpec& spec, const Mat& x, const std::optional<Vec>& y, const Mat& inducing) {
        const SvgpState st = y ? SvgpState::with_labels(spec, make_dataset(x, y), inducing)
                               : SvgpState::label_free(spec, x, inducing);
        return svgp_elbo(st);
      },
      py::arg("spec"), py::arg("x"), py::arg("y"), py::arg("inducing"),
      "Collapsed bound; pass y=None for the label-free bound.");
  m.def(
      "svgp_elbo_grad_inducing",
      [](const KernelSpec& spec, const Mat& x, const Mat& inducing) {
        return elbo_grad_inducing(SvgpState::label_free(spec, x, inducing));
      },
      py::arg("spec"), py::arg("x"), py::arg("inducing"));
  m.def(
      "svgp_predict",
      [](const KernelSpec& spec, const Mat& x, const Vec& y, const Mat& inducing, const Mat& test) {
        GaussianPrediction p = svgp_predict(SvgpState::with_labels(spec, make_dataset(x, y), inducing), test);
        return py::make_tuple(p.mean, p.covariance);
      },
      py::arg("spec"), py::arg("x"), py::arg("y"), py::arg("inducing"), py::arg("test"));

  py::enum_<PlacementMethod>(m, "PlacementMethod")
      .value("continuous_sgp", PlacementMethod::continuous_sgp)
      .value("greedy_sgp", PlacementMethod::greedy_sgp)
      .value("discrete_sgp", PlacementMethod::discrete_sgp)
      .value("greedy_mi", PlacementMethod::greedy_mi)
      .value("random", PlacementMethod::random)
      .value("fov_sgp", PlacementMethod::fov_sgp);
  m.def("method_from_string", [](const std::string& s) { return placement_method_from_string(s); });
  m.def("method_names", &placement_method_names);

  py::class_<PlacementResult>(m, "PlacementResult")
      .def_readonly("method", &PlacementResult::method)
      .def_readonly("locations", &PlacementResult::locations)
      .def_readonly("elbo", &PlacementResult::elbo)
      .def_readonly("seed", &PlacementResult::seed)
      .def_readonly("wall_time", &PlacementResult::wall_time)
      .def_readonly("metrics", &PlacementResult::metrics)
      .def_readonly("angles", &PlacementResult::angles)
      .def_property_readonly("num_sensors", &PlacementResult::num_sensors)
      .def("to_json", [](const PlacementResult& r) { return dump(placement_to_json(r)); });

  py::class_<FanGeometry>(m, "FanGeometry")
      .def(py::init<>())
      .def_readwrite("center", &FanGeometry::center)
      .def_readwrite("radius", &FanGeometry::radius)
      .def_readwrite("fan_angle", &FanGeometry::fan_angle)
      .def_readwrite("rays", &FanGeometry::rays)
      .def_readwrite("points_per_ray", &FanGeometry::points_per_ray);
  m.def("sensor_positions", &sensor_positions, py::arg("angles"), py::arg("geom"));
  m.def("expansion_transform", &expansion_transform, py::arg("angles"), py::arg("geom"));

  m.def(
      "place",
      [](const std::string& method, Eigen::Index num_sensors, const Environment& env, const KernelSpec& spec,
         std::uint64_t seed, int max_iters, double learning_rate, Eigen::Index num_samples,
         const std::optional<Mat>& grid, const std::optional<FanGeometry>& fan, bool discrete_random) {
        MethodRequest req;
        req.method = placement_method_from_string(method);
        req.num_sensors = num_sensors;
        req.options.seed = seed;
        req.options.max_iters = max_iters;
        req.options.learning_rate = learning_rate;
        req.options.num_samples = num_samples;
        if (grid) req.grid = EvaluationGrid{*grid, std::nullopt};
        req.fan = fan;
        req.discrete_random = discrete_random;
        py::gil_scoped_release release;
        return run_method(env, spec, req);
      },
      py::arg("method"), py::arg("num_sensors"), py::arg("env"), py::arg("spec"), py::arg("seed") = 0,
      py::arg("max_iters") = 3000, py::arg("learning_rate") = 1e-2, py::arg("num_samples") = 0,
      py::arg("grid") = py::none(), py::arg("fan") = py::none(), py::arg("discrete_random") = false);
  m.def("greedy_sgp_select",
        [](const KernelSpec& spec, const Mat& x, const Mat& candidates, Eigen::Index s) {
          return greedy_sgp_select(spec, x, candidates, s).indices;
        },
        py::arg("spec"), py::arg("x"), py::arg("candidates"), py::arg("s"));
  m.def("label_free_elbo", &label_free_elbo, py::arg("spec"), py::arg("x"), py::arg("inducing"));

  m.def("mutual_information", &mutual_information, py::arg("spec"), py::arg("a"), py::arg("r"));
  m.def(
      "rmse_reconstruction",
      [](const KernelSpec& spec, const Mat& placements, const Mat& grid, const Vec& labels) {
        return rmse_reconstruction(spec, placements, EvaluationGrid{grid, labels});
      },
      py::arg("spec"), py::arg("placements"), py::arg("grid"), py::arg("labels"));
  m.def(
      "exact_kl",
      [](const KernelSpec& spec, const Mat& x, const Vec& y, const Mat& inducing, const Mat& test) {
        return exact_kl(spec, make_dataset(x, y), inducing, test);
      },
      py::arg("spec"), py::arg("x"), py::arg("y"), py::arg("inducing"), py::arg("test"));

  m.def("kernel_to_json", [](const KernelSpec& k) { return dump(kernel_to_json(k)); });
  m.def("kernel_from_json", [](const std::string& s) { return kernel_from_json(Json::parse(s)); });
  m.def("load_kernel", &load_kernel, py::arg("path"));
  m.def("load_environment", &load_environment, py::arg("path"));
  m.def("load_placement", &load_placement, py::arg("path"));
  m.def("validate_placement", &validate_placement, py::arg("result"), py::arg("env"));
}
