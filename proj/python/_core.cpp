// Python bindings: environments, the exact oracle, training runs and the
// verification suites. JSON crosses the boundary as text.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "acpo/gridworld.hpp"
#include "acpo/harness.hpp"
#include "acpo/verification.hpp"

namespace py = pybind11;
using namespace acpo;

namespace {

RunConfig parse_config(const std::string& text) {
  return config_from_json(nlohmann::json::parse(text));
}

Matrix probs_or_policy(const CmdpSpec& spec, const py::object& policy) {
  if (policy.is_none()) {
    return Matrix::Constant(spec.num_states, spec.num_actions, 1.0 / spec.num_actions);
  }
  return policy.cast<Matrix>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive constrained policy optimization on exact gridworld CMDPs";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<CmdpSpec>(m, "CmdpSpec")
      .def_readonly("num_states", &CmdpSpec::num_states)
      .def_readonly("num_actions", &CmdpSpec::num_actions)
      .def_readonly("discount", &CmdpSpec::discount)
      .def_readonly("horizon", &CmdpSpec::horizon)
      .def_readonly("reward", &CmdpSpec::reward)
      .def_readonly("costs", &CmdpSpec::costs)
      .def_readonly("initial_dist", &CmdpSpec::initial_dist)
      .def_property_readonly("num_costs", &CmdpSpec::num_costs)
      .def("transition", [](const CmdpSpec& s, int state, int action) {
        Vector row(s.num_states);
        for (int n = 0; n < s.num_states; ++n) row[n] = s.p(state, action, n);
        return row;
      }, py::arg("state"), py::arg("action"))
      .def("to_json", [](const CmdpSpec& s) { return to_json(s).dump(); });

  m.def("gridworld", [](const std::string& kind, int size, std::uint64_t seed) {
    return build_gridworld(kind, size, seed);
  }, py::arg("kind"), py::arg("size") = 5, py::arg("seed") = 0);

  m.def("environment_from_config", [](const std::string& text) {
    return build_environment(parse_config(text));
  }, py::arg("config_json"));

  m.def("lp_solve", [](const CmdpSpec& spec, const Vector& budget) {
    const LpSolution s = lp_solve(spec, budget);
    py::dict out;
    out["feasible"] = s.feasible();
    out["j_star"] = s.j_star;
    out["policy"] = s.policy;
    out["j_cost"] = s.j_cost;
    return out;
  }, py::arg("spec"), py::arg("budget"));

  m.def("exact_eval", [](const CmdpSpec& spec, const py::object& policy) {
    const ExactEval e = exact_eval(spec, probs_or_policy(spec, policy));
    py::dict out;
    out["j_reward"] = e.j_reward;
    out["j_cost"] = e.j_cost;
    out["v_reward"] = e.v_reward;
    out["visitation"] = e.visitation;
    return out;
  }, py::arg("spec"), py::arg("policy") = py::none(),
     "Exact returns of a state-by-action probability table (uniform when omitted).");

  m.def("canonical_config", [](const std::string& text) {
    return canonical_text(parse_config(text));
  }, py::arg("config_json"), "Validated config with every default filled in.");

  m.def("run", [](const std::string& text, const std::string& out_dir) {
    const RunConfig c = parse_config(text);
    RunResult run;
    {
      py::gil_scoped_release release;
      run = execute_run(c, out_dir);
    }
    return run_summary(c, build_environment(c), run).dump();
  }, py::arg("config_json"), py::arg("out_dir"),
     "Trains one configuration, writes its artifacts and returns the summary as JSON text.");

  m.def("verify", [](const std::string& suite, std::uint64_t seed) {
    SuiteResult r;
    {
      py::gil_scoped_release release;
      if (suite == "lemma") {
        r = run_lemma_suite(seed);
      } else if (suite == "gap") {
        r = run_gap_suite(seed);
      } else if (suite == "gradient") {
        r = run_gradient_suite(seed);
      } else {
        throw std::invalid_argument("suite must be lemma, gap or gradient");
      }
    }
    return to_json(r).dump();
  }, py::arg("suite"), py::arg("seed") = 0);

  m.def("front_csv", &front_csv, py::arg("spec"), py::arg("lo"), py::arg("hi"),
        py::arg("points"));
}
