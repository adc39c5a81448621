// SPDX-License-Identifier: Apache-2.0
// Thin bindings; documents cross the boundary as JSON text.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "harvest/error.hpp"
#include "harvest/io.hpp"

namespace py = pybind11;
using namespace harvest;

namespace {

std::string run(const std::string& scenario_json, const std::string& scheme, const std::optional<std::string>& model_json,
                std::uint64_t trials, std::optional<std::uint64_t> seed, int max_iterations) {
  const Scenario s = scenario_from_json(Json::parse(scenario_json));
  const Scheme sc = scheme_from_string(scheme);
  LogisticModel model = LogisticModel::line_of_sight();
  if (sc != Scheme::lb) {
    if (!model_json) throw InvalidInput("a model is required for scheme " + scheme);
    model = model_from_json(Json::parse(*model_json));
  }
  RunOptions opts;
  opts.trials = trials;
  opts.seed = seed.value_or(s.seed);
  opts.planner.max_iterations = max_iterations;
  SchemeResult res;
  {
    py::gil_scoped_release release;
    res = run_scheme(sc, s, model, opts);
  }
  RunRecord rec;
  rec.scheme = scheme;
  rec.seed = opts.seed;
  rec.scenario = s;
  rec.model = model;
  rec.planner = {{"max_iterations", max_iterations}, {"trials", trials}, {"seed", opts.seed}};
  rec.relaxed_eta = res.rounding.relaxed_eta;
  rec.altitude = res.altitude;
  rec.plan = std::move(res.plan);
  rec.report = std::move(res.report);
  return dump_json(run_to_json(rec));
}

std::string csv_of(const std::string& run_json) {
  const RunRecord rec = run_from_json(Json::parse(run_json));
  return trajectory_csv(rec.plan, rec.scenario, rec.model);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UAV trajectory and scheduling planner under angle-dependent Rician fading";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("marcum_q1", &marcum_q1, py::arg("a"), py::arg("b"));
  m.def("fading_power_cdf", &fading_power_cdf, py::arg("u"), py::arg("k"));
  m.def("inverse_q", &inverse_q, py::arg("p"));
  m.def("exact_effective_power", &exact_effective_power, py::arg("k"), py::arg("eps"));
  m.def("lemma1_effective_power", &lemma1_effective_power, py::arg("k"), py::arg("eps"));
  m.def("k_threshold", &k_threshold, py::arg("eps"));

  m.def(
      "fit_model_json",
      [](double kmin_db, double kmax_db, double eps, int grid) {
        return dump_json(model_to_json(fit_logistic_for(kmin_db, kmax_db, eps, grid)));
      },
      py::arg("kmin_db"), py::arg("kmax_db"), py::arg("eps"), py::arg("grid") = 200);
  m.def(
      "resolve_scenario_json",
      [](const std::string& doc) { return dump_json(scenario_to_json(scenario_from_json(Json::parse(doc)))); },
      py::arg("doc"));
  m.def("run_scheme_json", &run, py::arg("scenario"), py::arg("scheme"), py::arg("model") = std::nullopt,
        py::arg("trials") = 0, py::arg("seed") = std::nullopt, py::arg("max_iterations") = 50);
  m.def("trajectory_csv", &csv_of, py::arg("run"));
}
