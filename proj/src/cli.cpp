#include "nsrlab/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nsrlab/config.hpp"
#include "nsrlab/errors.hpp"
#include "nsrlab/gradcheck.hpp"
#include "nsrlab/schedules.hpp"
#include "nsrlab/text.hpp"

namespace nsrlab {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Seed overriding the config");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(c.config);
  if (c.seed) {
    cfg.training.seed = *c.seed;
    cfg.eval.seed = *c.seed;
  }
  return cfg;
}

fs::path output_dir(const Common& c, const ExperimentConfig& cfg, const std::string& fallback) {
  if (!c.out.empty()) return c.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return fs::path("runs") / (cfg.run_name.empty() ? fallback : cfg.run_name);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string method_label(const ExperimentConfig& cfg) {
  return cfg.run_name.empty() ? std::string(to_string(cfg.training.objective.family)) : cfg.run_name;
}

std::string snapshot_name(std::size_t step) {
  std::ostringstream name;
  name << "policy_step_" << std::setw(6) << std::setfill('0') << step << ".json";
  return name.str();
}

int cmd_train(const Common& c, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(c);
  const fs::path dir = output_dir(c, cfg, "train");
  cfg.output_dir = dir.generic_string();
  fs::create_directories(dir / "snapshots");
  write_text(dir / "config.resolved.json", config_to_json(cfg).dump(2) + "\n");

  const TrainResult result = run_training(cfg.training);
  write_metrics_csv(dir / "metrics.csv", result.metrics);
  for (const auto& snap : result.snapshots) save_policy(snap.policy, dir / "snapshots" / snapshot_name(snap.step));
  save_policy(result.policy, dir / "policy_final.json");

  const EvalReport report = evaluate_policy(result.policy, Environment(cfg.training.env), cfg.eval);
  write_text(dir / "eval_report.json", report.to_json().dump(2) + "\n");
  write_text(dir / "eval_report.txt", report.to_text());

  if (!c.quiet) {
    out << "trained " << to_string(cfg.training.objective.family) << " for " << cfg.training.total_steps
        << " steps (seed " << cfg.training.seed << ")\n";
    if (!result.metrics.empty() && cfg.training.track_exact) {
      out << "exact correct mass " << format_fixed(result.metrics.back().correct_mass, 4) << '\n';
    }
    out << "mean policy entropy " << format_fixed(mean_policy_entropy(result.policy), 4) << '\n';
    out << "outputs in " << dir.generic_string() << '\n';
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& policy_path, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(c);
  const Environment env(cfg.training.env);
  const PolicyTable policy = load_policy(policy_path);
  if (!(policy.shape() == env.shape())) {
    throw InconsistentPolicy("policy snapshot shape does not match env section of the config");
  }
  const EvalReport report = evaluate_policy(policy, env, cfg.eval);
  const fs::path dir = output_dir(c, cfg, "eval");
  fs::create_directories(dir);
  write_text(dir / "eval_report.json", report.to_json().dump(2) + "\n");
  write_text(dir / "eval_report.txt", report.to_text());
  if (!c.quiet) out << report.to_text();
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t configs, std::size_t probes, std::ostream& out) {
  GradcheckOptions options;
  options.configs_per_case = configs;
  options.probes_per_config = probes;
  if (!c.config.empty() || c.seed) {
    const ExperimentConfig cfg = resolve_config(c);
    options.seed = cfg.training.seed;
    if (!c.config.empty()) options.env = cfg.training.env;
  }
  const GradcheckReport report = run_gradcheck_suite(options);
  const std::string table = format_gradcheck_table(report);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "gradcheck.txt", table);
  }
  if (!c.quiet) out << table;
  out << "max rel err " << format_scientific(report.max_rel_error(false), 3) << '\n';
  return report.passed() ? 0 : 1;
}

int cmd_schedule_dump(const Common& c, std::optional<std::int64_t> steps, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(c);
  const ScheduleSpec spec = cfg.training.objective.schedule.value_or(ScheduleSpec{});
  if (spec.kind == ScheduleKind::PerformanceDriven) {
    throw ConfigError("schedule.kind", "performance-driven weights depend on the batch, not on t");
  }
  const std::int64_t last = steps.value_or(spec.total_steps);
  if (last < 0) throw ConfigError("--steps", "must be non-negative");
  std::string csv = "t,lambda,beta,rho\n";
  for (std::int64_t t = 0; t <= last; ++t) {
    Diagnostics diag;
    const WeightPair w = schedule_weights(static_cast<double>(t), spec, std::nullopt, &diag);
    csv += std::to_string(t) + ',' + format_double(w.lambda_t) + ',' + format_double(w.beta_t) + ',' +
           format_double(w.beta_t / w.lambda_t) + '\n';
  }
  const fs::path dir = output_dir(c, cfg, "schedule");
  fs::create_directories(dir);
  write_text(dir / "schedule.csv", csv);
  if (!c.quiet) {
    const WeightPair first = schedule_weights(0.0, spec);
    out << to_string(spec.kind) << ": t=0 lambda=" << format_double(first.lambda_t)
        << " beta=" << format_double(first.beta_t) << " rho=" << format_double(first.beta_t / first.lambda_t)
        << '\n';
    out << "wrote " << (last + 1) << " rows to " << (dir / "schedule.csv").generic_string() << '\n';
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& configs, const Common& c, std::size_t num_seeds,
                std::ostream& out) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto& path : configs) {
    Common one = c;
    one.config = path;
    cfgs.push_back(resolve_config(one));
  }
  const fs::path dir = c.out.empty() ? fs::path("runs") / "compare" : fs::path(c.out);
  fs::create_directories(dir);
  std::string csv = "method,k,value,seed\n";
  for (auto& cfg : cfgs) {
    const std::string method = method_label(cfg);
    const std::uint64_t base = cfg.training.seed;
    for (std::size_t s = 0; s < num_seeds; ++s) {
      cfg.training.seed = base + s;
      cfg.eval.seed = base + s;
      const TrainResult result = run_training(cfg.training);
      const EvalReport report = evaluate_policy(result.policy, Environment(cfg.training.env), cfg.eval);
      for (std::size_t j = 0; j < report.k_grid.size(); ++j) {
        csv += method + ',' + std::to_string(report.k_grid[j]) + ',' + format_double(report.pass_at_k[j]) + ',' +
               std::to_string(cfg.training.seed) + '\n';
      }
      if (!c.quiet) {
        out << pad_right(method, 24) << " seed " << cfg.training.seed << "  pass@1 "
            << format_fixed(report.pass_at_k.front(), 4) << "  pass@" << report.k_grid.back() << ' '
            << format_fixed(report.pass_at_k.back(), 4) << '\n';
      }
    }
  }
  write_text(dir / "passk.csv", csv);
  if (!c.quiet) out << "wrote " << (dir / "passk.csv").generic_string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Negative-sample reinforcement experiments on tabular policies", "nsrlab"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, grad_opts, dump_opts, compare_opts;
  auto* train = app.add_subcommand("train", "Train a policy and write metrics, snapshots and an eval report");
  add_common(train, train_opts, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a policy snapshot");
  add_common(eval, eval_opts, true);
  std::string policy_path;
  eval->add_option("--policy", policy_path, "Policy snapshot (JSON)")->required();

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  add_common(grad, grad_opts, false);
  std::size_t gc_configs = GradcheckOptions{}.configs_per_case;
  std::size_t gc_probes = GradcheckOptions{}.probes_per_config;
  grad->add_option("--configs-per-case", gc_configs, "Random configurations per case")->check(CLI::PositiveNumber);
  grad->add_option("--probes", gc_probes, "Logits probed per configuration")->check(CLI::PositiveNumber);

  auto* dump = app.add_subcommand("schedule-dump", "Write lambda(t), beta(t) and rho(t) as CSV");
  add_common(dump, dump_opts, false);
  std::optional<std::int64_t> dump_steps;
  dump->add_option("--steps", dump_steps, "Last step to dump (default: schedule.total_steps)");

  auto* compare = app.add_subcommand("compare", "Train several configs on shared seeds and collect Pass@k");
  std::vector<std::string> compare_configs;
  compare->add_option("--config", compare_configs, "Experiment configs")->required()->expected(1, -1);
  compare->add_option("--out", compare_opts.out, "Output directory");
  compare->add_option("--seed", compare_opts.seed, "First seed (overrides every config)");
  compare->add_flag("--quiet", compare_opts.quiet, "Suppress progress output");
  std::size_t num_seeds = 1;
  compare->add_option("--num-seeds", num_seeds, "Consecutive seeds per config")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_opts, out);
    if (*eval) return cmd_eval(eval_opts, policy_path, out);
    if (*grad) return cmd_gradcheck(grad_opts, gc_configs, gc_probes, out);
    if (*dump) return cmd_schedule_dump(dump_opts, dump_steps, out);
    if (*compare) return cmd_compare(compare_configs, compare_opts, num_seeds, out);
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace nsrlab
