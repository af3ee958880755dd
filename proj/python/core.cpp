#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sfrbsde/averaging_lab.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/frac_kernel.hpp"
#include "sfrbsde/harness.hpp"
#include "sfrbsde/path_engine.hpp"

namespace py = pybind11;
using namespace sfrbsde;

namespace {

DeterministicFn preset(const std::string& name, const std::vector<double>& params, double horizon) {
  return CoefficientPreset{name, params}.build(horizon);
}

FbmMethod parse_method(const std::string& m) {
  if (m == "auto") return FbmMethod::Auto;
  if (m == "cholesky") return FbmMethod::Cholesky;
  if (m == "circulant") return FbmMethod::Circulant;
  throw DomainError("unknown fbm method '" + m + "'");
}

py::array_t<double> to_array(const PathMatrix& m) {
  py::array_t<double> out({m.paths(), m.nodes()});
  auto buf = out.mutable_unchecked<2>();
  for (std::size_t p = 0; p < m.paths(); ++p)
    for (std::size_t k = 0; k < m.nodes(); ++k) buf(p, k) = m(p, k);
  return out;
}

py::dict run_command(const std::string& name, const std::string& config_text,
                     const std::vector<std::string>& expect_fail) {
  const auto cfg = parse_config_text(config_text);
  CommandResult r;
  {
    py::gil_scoped_release release;
    if (name == "simulate-fbm") r = cmd_simulate_fbm(cfg);
    else if (name == "solve") r = cmd_solve(cfg);
    else if (name == "sweep") r = cmd_sweep(cfg);
    else if (name == "verify") r = cmd_verify(cfg, expect_fail);
    else throw DomainError("unknown command '" + name + "'");
  }
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["passed"] = c.passed;
    d["value"] = c.value;
    d["threshold"] = c.threshold;
    d["detail"] = c.detail;
    checks.append(d);
  }
  py::list files;
  for (const auto& f : r.files) files.append(f.string());
  py::dict out;
  out["passed"] = r.passed();
  out["checks"] = checks;
  out["files"] = files;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the sfrbsde averaging lab";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto domain = py::register_exception<DomainError>(m, "DomainError", error.ptr());
  auto numeric = py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<QuadratureError>(m, "QuadratureError", numeric.ptr());
  py::register_exception<ConsistencyError>(m, "ConsistencyError", numeric.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", domain.ptr());
  py::register_exception<ContractError>(m, "ContractError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  m.def("rho", [](double t, double s, double h) { return sfrbsde::rho(t, s, HurstModel(h)); }, py::arg("t"), py::arg("s"),
        py::arg("hurst"));
  m.def(
      "norm_sq",
      [](const std::string& name, const std::vector<double>& params, double t, double h, double horizon) {
        return norm_sq(preset(name, params, horizon), t, HurstModel(h));
      },
      py::arg("preset"), py::arg("params"), py::arg("t"), py::arg("hurst"), py::arg("horizon") = 1.0,
      "Squared fractional norm of a preset coefficient on [0, t].");
  m.def(
      "kernel_transform",
      [](const std::string& name, const std::vector<double>& params, double t, double h, double horizon) {
        return kernel_transform(preset(name, params, horizon), t, HurstModel(h));
      },
      py::arg("preset"), py::arg("params"), py::arg("t"), py::arg("hurst"), py::arg("horizon") = 1.0);
  m.def("c0_const", [](double horizon, double h) { return c0_const(HurstModel(h), horizon); }, py::arg("horizon"),
        py::arg("hurst"));
  m.def(
      "sample_fbm",
      [](double horizon, int n_steps, double h, std::size_t n_paths, std::uint64_t seed, const std::string& method) {
        const TimeGrid grid(horizon, n_steps);
        const auto fm = parse_method(method);
        PathMatrix paths;
        {
          py::gil_scoped_release release;
          paths = make_ensemble(grid, HurstModel(h), n_paths, seed, fm).fractional;
        }
        return to_array(paths);
      },
      py::arg("horizon"), py::arg("n_steps"), py::arg("hurst"), py::arg("n_paths"), py::arg("seed") = 42,
      py::arg("method") = "auto", "fBm paths as a (paths, n_steps + 1) array, column 0 at t = 0.");
  m.def(
      "solve_alpha0",
      [](double lipschitz, double c1, double eps, double h) { return solve_alpha0(lipschitz, c1, eps, HurstModel(h)); },
      py::arg("lipschitz"), py::arg("c1"), py::arg("epsilon"), py::arg("hurst"));
  m.def(
      "fit_log_slope",
      [](const std::vector<double>& x, const std::vector<double>& y) { return fit_log_slope(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def("normalize_config", [](const std::string& text) { return to_text(parse_config_text(text)); },
        py::arg("text"));
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config_text(text)); },
        py::arg("text"));
  m.def("run_command", &run_command, py::arg("name"), py::arg("config_text") = "",
        py::arg("expect_fail") = std::vector<std::string>{});
}
