// Python bindings for the EMI forward model and inversion.

#include "emi/doi.hpp"
#include "emi/errors.hpp"
#include "emi/forward.hpp"
#include "emi/inversion.hpp"
#include "emi/synthdata.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>

#include <stdexcept>

namespace py = pybind11;
using namespace emi;

namespace {

LayeredEarthModel model_from(std::vector<double> depths, std::vector<double> sigma) {
  return LayeredEarthModel(std::move(depths), std::move(sigma));
}

Stabilizer stabilizer_from(const std::string& s) {
  if (s == "identity" || s == "l0") return Stabilizer::Identity;
  if (s == "d1" || s == "l1") return Stabilizer::D1;
  if (s == "d2" || s == "l2") return Stabilizer::D2;
  if (s == "mgs") return Stabilizer::Mgs;
  throw std::invalid_argument("unknown regularizer '" + s + "'");
}

ParameterRule rule_from(const std::string& param, double delta, Eigen::Index ell, bool per_iteration) {
  ParameterRule r;
  if (param == "disc") {
    if (!(delta > 0.0)) throw std::invalid_argument("the discrepancy rule needs delta > 0");
    r = ParameterRule::discrepancy(delta);
  } else if (param == "lcurve") {
    r = ParameterRule::lcurve();
  } else if (param == "fixed") {
    r = ParameterRule::fixed(ell);
  } else {
    throw std::invalid_argument("unknown parameter rule '" + param + "'");
  }
  return per_iteration ? r.each_iteration() : r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Layered-earth EMI forward model and regularized Gauss-Newton inversion";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<InversionFailure>(m, "InversionFailure", PyExc_RuntimeError);

  py::enum_<Orientation>(m, "Orientation")
      .value("vertical", Orientation::Vertical)
      .value("horizontal", Orientation::Horizontal);

  py::class_<LayeredEarthModel>(m, "Model")
      .def(py::init(&model_from), py::arg("depths"), py::arg("sigma"))
      .def_static("uniform", py::overload_cast<std::size_t, double, std::vector<double>>(&LayeredEarthModel::uniform),
                  py::arg("n"), py::arg("depth"), py::arg("sigma"))
      .def_property_readonly("depths", [](const LayeredEarthModel& x) {
        return std::vector<double>(x.depths().begin(), x.depths().end());
      })
      .def_property_readonly("sigma", &LayeredEarthModel::sigma_vector)
      .def("__len__", &LayeredEarthModel::size);

  py::class_<DeviceConfig>(m, "Device")
      .def(py::init<std::vector<double>, std::vector<double>, std::vector<double>, std::vector<Orientation>>(),
           py::arg("spacings"), py::arg("heights"), py::arg("frequencies"), py::arg("orientations"))
      .def("__len__", &DeviceConfig::size)
      .def("__eq__", [](const DeviceConfig& a, const DeviceConfig& b) { return a == b; });

  m.def("cmd_explorer", &cmd_explorer,
        py::arg("orientations") = std::vector<Orientation>{Orientation::Vertical, Orientation::Horizontal},
        py::arg("heights") = std::vector<double>{0.9, 1.8});

  m.def("forward", &forward_response, py::arg("model"), py::arg("device"),
        "Complex readings M_nu in layout order.");
  m.def("jacobian", [](const LayeredEarthModel& x, const DeviceConfig& d) { return jacobian(x, d).matrix; },
        py::arg("model"), py::arg("device"), "Complex Jacobian of the residual b - M, one column per layer.");

  m.def("profile_gaussian", &profile_gaussian);
  m.def("profile_step", &profile_step);
  m.def("discretize", &discretize_profile, py::arg("profile"), py::arg("n") = 60, py::arg("depth") = 3.5);
  m.def("add_noise",
        [](const DataVector& b, double delta, std::uint64_t seed, bool per_entry) {
          return add_noise(b, delta, seed, per_entry ? NoiseScaling::PerEntry : NoiseScaling::Printed);
        },
        py::arg("readings"), py::arg("delta"), py::arg("seed"), py::arg("per_entry") = false);
  m.def("nominal_snr_db", &nominal_snr_db);

  m.def("invert",
        [](const DeviceConfig& device, const DataVector& data, const std::string& reg, const std::string& param,
           double delta, Eigen::Index ell, double tau, bool quadrature_only, std::size_t layers, double depth,
           std::vector<double> starts, bool per_iteration) {
          InversionConfig c;
          c.stabilizer = stabilizer_from(reg);
          c.tau = tau;
          c.rule = rule_from(param, delta, ell, per_iteration);
          c.mode = quadrature_only ? DataMode::QuadratureOnly : DataMode::Complex;
          c.layer_tops = uniform_layer_tops(layers, depth);
          c.starts = std::move(starts);
          const ForwardModel f(device);
          InversionResult r;
          {
            py::gil_scoped_release nogil;
            r = invert_sounding(f, data, c);
          }
          py::dict out;
          out["depths"] = r.depths;
          out["sigma"] = r.sigma;
          out["ell"] = r.ell;
          out["residual"] = r.residual;
          out["relative_misfit"] = r.relative_misfit;
          out["converged"] = r.converged;
          out["termination"] = std::string(to_string(r.termination));
          out["iterations"] = r.iterations.size();
          out["sensitivity"] = r.sensitivity;
          return out;
        },
        py::arg("device"), py::arg("data"), py::arg("reg") = "d2", py::arg("param") = "lcurve",
        py::arg("delta") = 0.0, py::arg("ell") = 1, py::arg("tau") = 1e-2, py::arg("quadrature_only") = false,
        py::arg("layers") = 60, py::arg("depth") = 3.5, py::arg("starts") = std::vector<double>{0.5},
        py::arg("per_iteration") = false);

  m.def("integrated_sensitivity", &integrated_sensitivity);
  m.def("doi",
        [](const Eigen::VectorXd& s, const std::vector<double>& depths, double eta) {
          return doi_depth(s, depths, eta);
        },
        py::arg("sensitivity"), py::arg("depths"), py::arg("eta") = kDefaultEta);
}
