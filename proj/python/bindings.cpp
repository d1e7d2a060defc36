#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nsrlab/cli.hpp"
#include "nsrlab/config.hpp"
#include "nsrlab/eval.hpp"
#include "nsrlab/gradcheck.hpp"
#include "nsrlab/trainer.hpp"

namespace py = pybind11;
using namespace nsrlab;

namespace {

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = config_from_json(nlohmann::json::parse(text));
  if (seed) {
    cfg.training.seed = *seed;
    cfg.eval.seed = *seed;
  }
  cfg.validate();
  return cfg;
}

py::dict metrics_row(const MetricsRow& r) {
  py::dict d;
  d["step"] = r.step;
  d["loss"] = r.loss;
  d["lambda"] = r.lambda_t;
  d["beta"] = r.beta_t;
  d["rho"] = r.rho_t;
  d["p_correct"] = r.p_correct;
  d["entropy"] = r.entropy;
  d["correct_mass"] = r.correct_mass;
  d["mean_conf_incorrect"] = r.mean_conf_incorrect;
  d["gradnorm_var"] = r.gradnorm_var;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nsrlab, m) {
  m.doc() = "Tabular policy-gradient objectives on verifiable-reward toy tasks";

  // Base class first: later registrations are tried first.
  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<OutOfRange>(m, "OutOfRange", PyExc_ValueError);
  py::register_exception<InconsistentPolicy>(m, "InconsistentPolicy", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("pass_at_k", &pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def("pass_at_k_oracle", &pass_at_k_oracle, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def("default_k_grid", &default_k_grid);

  m.def(
      "resolve_config",
      [](const std::string& text) { return config_to_json(parse_config(text, std::nullopt)).dump(); },
      py::arg("config_json"), "Validated config with every default filled in, as JSON.");

  m.def(
      "schedule_weights",
      [](const std::string& text, double t, std::optional<double> p_correct) {
        const ExperimentConfig cfg = parse_config(text, std::nullopt);
        const auto& schedule = cfg.training.objective.schedule;
        if (!schedule) throw ConfigError("schedule", "config has no schedule section");
        const WeightPair w = schedule_weights(t, *schedule, p_correct);
        return py::make_tuple(w.lambda_t, w.beta_t);
      },
      py::arg("config_json"), py::arg("t"), py::arg("p_correct") = py::none());

  m.def(
      "train",
      [](const std::string& text, std::optional<std::uint64_t> seed) {
        const ExperimentConfig cfg = parse_config(text, seed);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = run_training(cfg.training);
        }
        py::list rows;
        for (const auto& r : result.metrics) rows.append(metrics_row(r));
        py::dict out;
        out["metrics"] = rows;
        out["policy"] = policy_to_json(result.policy).dump();
        return out;
      },
      py::arg("config_json"), py::arg("seed") = py::none());

  m.def(
      "evaluate",
      [](const std::string& text, const std::string& policy_json, std::optional<std::uint64_t> seed) {
        const ExperimentConfig cfg = parse_config(text, seed);
        const PolicyTable policy = policy_from_json(nlohmann::json::parse(policy_json));
        const Environment env(cfg.training.env);
        py::gil_scoped_release release;
        return evaluate_policy(policy, env, cfg.eval).to_json().dump();
      },
      py::arg("config_json"), py::arg("policy_json"), py::arg("seed") = py::none());

  m.def(
      "gradcheck",
      [](std::size_t configs_per_case, std::size_t probes, std::uint64_t seed) {
        GradcheckOptions options;
        options.configs_per_case = configs_per_case;
        options.probes_per_config = probes;
        options.seed = seed;
        GradcheckReport report;
        {
          py::gil_scoped_release release;
          report = run_gradcheck_suite(options);
        }
        py::list rows;
        for (const auto& r : report.rows) {
          py::dict d;
          d["label"] = r.label;
          d["configs"] = r.configs;
          d["probes"] = r.probes;
          d["max_rel_error"] = r.max_rel_error;
          d["passed"] = r.passed;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["passed"] = report.passed();
        out["sampled_configs"] = report.sampled_configs();
        out["table"] = format_gradcheck_table(report);
        return out;
      },
      py::arg("configs_per_case") = 12, py::arg("probes") = 24, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"nsrlab"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
