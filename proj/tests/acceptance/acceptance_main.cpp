// Acceptance suite: one PASS/FAIL line per criterion.
//
//   nsrlab_acceptance            run every criterion
//   nsrlab_acceptance --only N   run criterion N
//
// Exit status is nonzero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "nsrlab/cli.hpp"
#include "nsrlab/config.hpp"
#include "nsrlab/eval.hpp"
#include "nsrlab/gradcheck.hpp"
#include "nsrlab/gradients.hpp"
#include "nsrlab/text.hpp"
#include "nsrlab/trainer.hpp"

using namespace nsrlab;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes, fixed by the acceptance criteria.
constexpr double kRatioStartTol = 1e-9;
constexpr double kRatioEndTol = 0.02;
constexpr double kGradTol = 1e-6;
constexpr std::size_t kMinGradConfigs = 100;
constexpr double kExactTol = 1e-12;
constexpr int kConfidencePairs = 100;
constexpr int kPassAtKOracleMaxN = 12;
constexpr int kPassAtKMonotoneMaxN = 64;
constexpr int kBernoulliTrials = 100000;
constexpr double kSigmas = 5.0;
constexpr double kEntropyLr = 1e-4;
constexpr double kEntropyRatioTol = 0.01;
constexpr int kEntropyRollouts = 50;
constexpr double kRedistributionLr = 1e-4;
constexpr double kRedistributionTol = 0.01;
constexpr int kRedistributionCases = 20;
constexpr double kTrainTarget = 0.9;
constexpr std::size_t kSeeds = 5;
constexpr std::size_t kEntropyWinsNeeded = 4;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Criterion = std::function<Verdict()>;

Rollout draw_incorrect(const PolicyTable& p, const Environment& env, PromptId x, Rng& rng,
                       const ConfidenceParams& params = {}) {
  while (true) {
    Rollout r = make_rollout(0, x, sample_sequence(p, x, rng), env, params);
    if (r.reward == Reward::Incorrect) return r;
  }
}

EnvSpec random_env(Rng& rng) {
  EnvSpec env;
  env.vocab_size = 2 + rng.below(5);
  env.seq_len = 1 + rng.below(3);
  env.num_prompts = 1 + rng.below(3);
  for (std::size_t x = 0; x < env.num_prompts; ++x) env.targets.push_back(static_cast<TokenId>(rng.below(env.vocab_size)));
  return env;
}

std::string fmt(double v) { return format_scientific(v, 3); }

// 1
Verdict schedule_endpoints() {
  ScheduleSpec s;
  s.beta_max = 1.5;
  s.beta_min = 0.5;
  s.kappa = 0.03;
  s.lambda_min = 0.05;
  s.lambda_max = 0.2;
  s.total_steps = 2000;
  const double start = effective_ratio(0, s);
  const double end = effective_ratio(2000, s);
  const bool pass = std::abs(start - 30.0) <= kRatioStartTol && std::abs(end - 2.5) <= kRatioEndTol;
  return {pass, "rho(0)=" + format_double(start) + " rho(2000)=" + format_double(end)};
}

// 2
Verdict gradient_oracle() {
  GradcheckOptions options;
  options.tolerance = kGradTol;
  const GradcheckReport report = run_gradcheck_suite(options);
  std::cout << format_gradcheck_table(report);
  const bool pass = report.passed() && report.sampled_configs() >= kMinGradConfigs;
  return {pass, std::to_string(report.sampled_configs()) + " sampled configs, max rel err " +
                    fmt(report.max_rel_error(false))};
}

// 3
Verdict confidence_weighting() {
  Rng rng(303);
  double worst = 0.0;
  int ordered = 0, compared = 0;
  bool pass = true;
  for (int i = 0; i < kConfidencePairs; ++i) {
    const Environment env(random_env(rng));
    const PolicyTable p = PolicyTable::random(env.shape(), rng, 0.5 + 1.5 * rng.uniform());
    const ConfidenceParams params{0.25 + 2.0 * rng.uniform(), 0.05 + 0.2 * rng.uniform()};
    ObjectiveSpec cw;
    cw.family = Family::CwNsr;
    cw.confidence = params;
    ObjectiveSpec nsr;
    nsr.family = Family::NsrOnly;
    double multiplier[2], conf[2], weight[2];
    for (int j = 0; j < 2; ++j) {
      const Rollout r = draw_incorrect(p, env, rng.below(env.num_prompts()), rng, params);
      const Rollout one[] = {r};
      const GradTable gc = batch_gradient(one, p, cw, 0);
      const GradTable gn = batch_gradient(one, p, nsr, 0);
      for (std::size_t k = 0; k < gc.values().size(); ++k) {
        worst = std::max(worst, std::abs(gc.values()[k] - r.hardness_weight * gn.values()[k]));
      }
      multiplier[j] = std::sqrt(gc.squared_norm() / gn.squared_norm());
      conf[j] = r.confidence;
      weight[j] = r.hardness_weight;
    }
    if (weight[0] > params.epsilon_floor && weight[1] > params.epsilon_floor && conf[0] != conf[1]) {
      ++compared;
      const bool ok = (conf[0] > conf[1]) == (multiplier[0] > multiplier[1]);
      ordered += ok;
      pass = pass && ok;
    }
  }
  pass = pass && worst <= kExactTol;
  return {pass, "max |g_cw - w g_nsr| " + fmt(worst) + ", ordering held in " + std::to_string(ordered) + "/" +
                    std::to_string(compared) + " pairs above the floor"};
}

// 4
Verdict pass_at_k_suite() {
  double worst = 0.0;
  for (int n = 1; n <= kPassAtKOracleMaxN; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) worst = std::max(worst, std::abs(pass_at_k(n, c, k) - pass_at_k_oracle(n, c, k)));
    }
  }
  bool monotone = true;
  for (int n = 1; n <= kPassAtKMonotoneMaxN; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k < n; ++k) monotone = monotone && pass_at_k(n, c, k) <= pass_at_k(n, c, k + 1);
    }
  }
  Rng rng(404);
  double worst_z = 0.0;
  for (double p : {0.1, 0.3}) {
    for (int k : {1, 4}) {
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < kBernoulliTrials; ++i) {
        int c = 0;
        for (int j = 0; j < 16; ++j) c += rng.uniform() < p;
        const double v = pass_at_k(16, c, k);
        sum += v;
        sq += v * v;
      }
      const double mean = sum / kBernoulliTrials;
      const double se = std::sqrt((sq / kBernoulliTrials - mean * mean) / kBernoulliTrials);
      worst_z = std::max(worst_z, std::abs(mean - (1 - std::pow(1 - p, k))) / se);
    }
  }
  const bool pass = worst <= kExactTol && monotone && worst_z <= kSigmas;
  return {pass, "oracle max diff " + fmt(worst) + ", monotone " + (monotone ? "yes" : "no") +
                    ", Bernoulli worst deviation " + format_fixed(worst_z, 2) + " SE"};
}

// 5
Verdict entropy_rate() {
  Rng rng(505);
  double worst = 0.0;
  for (int i = 0; i < kEntropyRollouts; ++i) {
    const Environment env(random_env(rng));
    const PolicyTable p = PolicyTable::random(env.shape(), rng, 0.5 + 1.5 * rng.uniform());
    const Rollout r = draw_incorrect(p, env, rng.below(env.num_prompts()), rng);
    const double beta = 0.5 + rng.uniform();
    const double h1 = entropy_rate_probe(p, r, beta, kEntropyLr).total;
    const double h2 = entropy_rate_probe(p, r, 2 * beta, kEntropyLr).total;
    worst = std::max(worst, std::abs(h2 / h1 - 2.0) / 2.0);
  }
  return {worst <= kEntropyRatioTol, "max relative deviation of dH(2b)/dH(b) from 2: " + fmt(worst)};
}

// 6
Verdict redistribution() {
  Rng rng(606);
  int increased_cases = 0, ratio_cases = 0;
  double worst_ratio = 0.0, worst_logit = 0.0;
  for (int i = 0; i < kRedistributionCases; ++i) {
    const Environment env(random_env(rng));
    const PolicyTable p = PolicyTable::random(env.shape(), rng, 0.5 + 1.5 * rng.uniform());
    const Rollout r = draw_incorrect(p, env, rng.below(env.num_prompts()), rng);
    const Rollout one[] = {r};
    SampleWeights nsr;
    nsr.positive = 0.0;
    const GradTable g = batch_gradient(one, p, nsr);
    const PolicyTable q = apply_update(p, g, kRedistributionLr);
    bool all_up = true;
    double case_ratio = 0.0;
    std::size_t node = 0;
    for (TokenId y : r.tokens) {
      const Distribution before = node_distribution(p, r.prompt, node);
      const Distribution after = node_distribution(q, r.prompt, node);
      const auto zb = p.row(r.prompt, node);
      const auto za = q.row(r.prompt, node);
      for (std::size_t v = 0; v < before.size(); ++v) {
        if (v == y) continue;
        all_up = all_up && after[v] > before[v];
        for (std::size_t u = 0; u < before.size(); ++u) {
          if (u == y || u == v) continue;
          const double inc = (after[v] - before[v]) / (after[u] - before[u]);
          case_ratio = std::max(case_ratio, std::abs(inc / (before[v] / before[u]) - 1.0));
          const double logit_inc = (za[v] - zb[v]) / (za[u] - zb[u]);
          worst_logit = std::max(worst_logit, std::abs(logit_inc / (before[v] / before[u]) - 1.0));
        }
      }
      node = p.child(node, y);
    }
    increased_cases += all_up;
    ratio_cases += case_ratio <= kRedistributionTol;
    worst_ratio = std::max(worst_ratio, case_ratio);
  }
  std::cout << "  info: logit increments dz_v / dz_u match pi_v / pi_u within " << fmt(worst_logit) << '\n';
  const bool pass = increased_cases == kRedistributionCases && ratio_cases == kRedistributionCases;
  return {pass, "all unsampled probabilities rose in " + std::to_string(increased_cases) + "/" +
                    std::to_string(kRedistributionCases) + " cases; probability increment ratios within 1% in " +
                    std::to_string(ratio_cases) + "/" + std::to_string(kRedistributionCases) +
                    " (worst relative deviation " + fmt(worst_ratio) + ")"};
}

// 7
Verdict implicit_regularization() {
  Rng rng(707);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    EnvSpec spec = random_env(rng);
    if (i % 2 == 1) {
      // Random membership lists instead of mod-sum.
      spec.rule = VerifierRule::MembershipList;
      const Environment probe(EnvSpec{spec.vocab_size, spec.seq_len, spec.num_prompts, VerifierRule::ModSum, {}, {}});
      for (std::size_t x = 0; x < spec.num_prompts; ++x) {
        std::vector<Sequence> list;
        for (std::size_t k = 0; k < 1 + rng.below(3); ++k) list.push_back(probe.sequence_at(rng.below(probe.num_sequences())));
        spec.correct_lists.push_back(list);
      }
    }
    const Environment env(spec);
    PolicyTable p = PolicyTable::random(env.shape(), rng);
    // Mark every (node, token) edge that leads to at least one correct
    // response; all other edges get logits 80 below, leaving the incorrect
    // set with mass below e^-70.
    for (PromptId x = 0; x < env.num_prompts(); ++x) {
      std::set<std::pair<std::size_t, TokenId>> viable;
      for (std::size_t idx = 0; idx < env.num_sequences(); ++idx) {
        if (!env.is_correct(x, idx)) continue;
        const Sequence seq = env.sequence_at(idx);
        std::size_t node = 0;
        for (TokenId tok : seq) {
          viable.insert({node, tok});
          node = p.child(node, tok);
        }
      }
      for (std::size_t n = 0; n < p.nodes_per_prompt(); ++n) {
        for (TokenId v = 0; v < env.vocab_size(); ++v) {
          if (!viable.count({n, v})) p.row(x, n)[v] -= 80.0;
        }
      }
    }
    SampleWeights nsr;
    nsr.positive = 0.0;
    worst = std::max(worst, exact_gradient(p, env, nsr, nullptr).max_abs());
  }
  return {worst <= kExactTol, "max |exact NSR gradient| " + fmt(worst) + " over 20 correct-supported policies"};
}

// 8
Verdict reductions() {
  Rng rng(808);
  double worst_a = 0.0, worst_c = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Environment env(random_env(rng));
    const PolicyTable p = PolicyTable::random(env.shape(), rng);
    std::vector<Rollout> batch;
    for (PromptId x = 0; x < env.num_prompts(); ++x) {
      for (int g = 0; g < 6; ++g) batch.push_back(make_rollout(batch.size(), x, sample_sequence(p, x, rng), env, {1.0, 1.0}));
    }
    ObjectiveSpec w;
    ObjectiveSpec a;
    a.family = Family::ANsr;
    a.schedule = ScheduleSpec{};
    a.schedule->kind = ScheduleKind::Constant;
    a.schedule->constant_lambda = 0.1;
    a.schedule->constant_beta = 1.0;
    ObjectiveSpec c;
    c.family = Family::CwNsr;
    c.confidence = ConfidenceParams{1.0, 1.0};  // floor 1: every weight saturates at 1
    const double t = static_cast<double>(rng.below(2000));
    const GradTable gw = batch_gradient(batch, p, w, t);
    const GradTable ga = batch_gradient(batch, p, a, t);
    const GradTable gc = batch_gradient(batch, p, c, t);
    const GradTable ew = exact_gradient(p, env, w, t);
    const GradTable ea = exact_gradient(p, env, a, t);
    const GradTable ec = exact_gradient(p, env, c, t);
    for (std::size_t k = 0; k < gw.values().size(); ++k) {
      worst_a = std::max({worst_a, std::abs(ga.values()[k] - gw.values()[k]), std::abs(ea.values()[k] - ew.values()[k])});
      worst_c = std::max({worst_c, std::abs(gc.values()[k] - gw.values()[k]), std::abs(ec.values()[k] - ew.values()[k])});
    }
  }
  return {worst_a <= kExactTol && worst_c <= kExactTol,
          "constant A-NSR max diff " + fmt(worst_a) + ", saturated CW-NSR max diff " + fmt(worst_c)};
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// 9
Verdict desk_training() {
  std::vector<double> initial, final_mass;
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    TrainConfig c;  // defaults: V=6, T=3, 8 prompts, G=8, W-REINFORCE, 2000 steps
    c.seed = seed;
    const Environment env(c.env);
    const PolicyTable start = PolicyTable::uniform(env.shape());
    double m0 = 0.0;
    for (PromptId x = 0; x < env.num_prompts(); ++x) m0 += correct_mass(env, x, start) / env.num_prompts();
    const TrainResult r = run_training(c);
    initial.push_back(m0);
    final_mass.push_back(r.metrics.back().correct_mass);
    std::cout << "  seed " << seed << ": correct mass " << format_fixed(m0, 4) << " -> "
              << format_fixed(final_mass.back(), 4) << '\n';
  }
  const double med = median(final_mass);
  const bool start_ok = std::abs(median(initial) - 1.0 / 6.0) <= 1e-12;
  return {start_ok && med > kTrainTarget, "median final correct mass " + format_fixed(med, 4) + " (start " +
                                             format_fixed(median(initial), 4) + ")"};
}

// 10
Verdict diversity_direction() {
  std::size_t wins = 0;
  for (std::size_t seed = 0; seed < kSeeds; ++seed) {
    TrainConfig adaptive;
    adaptive.seed = seed;
    adaptive.objective.family = Family::ANsr;
    adaptive.objective.schedule = ScheduleSpec{};
    TrainConfig constant = adaptive;
    // Same linear lambda(t); beta pinned at beta_max.
    constant.objective.schedule->beta_min = constant.objective.schedule->beta_max;
    const double ha = mean_policy_entropy(run_training(adaptive).policy);
    const double hc = mean_policy_entropy(run_training(constant).policy);
    wins += ha >= hc;
    std::cout << "  seed " << seed << ": entropy A-NSR " << format_fixed(ha, 4) << ", constant beta_max "
              << format_fixed(hc, 4) << '\n';
  }
  return {wins >= kEntropyWinsNeeded, "A-NSR entropy >= constant-beta entropy in " + std::to_string(wins) + "/" +
                                          std::to_string(kSeeds) + " seeds"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli_args(std::vector<std::string> args) {
  args.insert(args.begin(), "nsrlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cout << "  command failed: " << err.str();
  return code;
}

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("nsrlab_acceptance_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
};

void write_configs(const fs::path& dir) {
  nlohmann::json w = {{"objective", {{"family", "W-REINFORCE"}}}, {"training", {{"seed", 0}}}};
  nlohmann::json a = {{"objective", {{"family", "A-NSR"}}}, {"schedule", {{"kind", "exponential-linear"}}},
                      {"training", {{"seed", 0}}}};
  std::ofstream(dir / "w.json") << w.dump(2);
  std::ofstream(dir / "a.json") << a.dump(2);
}

// 11
Verdict compare_machinery() {
  std::cout << "  The benchmark Pass@k comparison (MATH, AIME 2025 and AMC23 with a 1.5B-parameter language\n"
               "  model) is NOT desk-reproducible and is excluded. The compare pipeline below only demonstrates\n"
               "  curve-shape machinery (monotone Pass@k curves per method) on the toy environment.\n";
  Workspace ws("compare");
  write_configs(ws.root);
  const int code = run_cli_args({"compare", "--config", (ws.root / "w.json").string(), "--config",
                                 (ws.root / "a.json").string(), "--num-seeds", "2", "--out",
                                 (ws.root / "out").string(), "--quiet"});
  if (code != 0) return {false, "compare exited with " + std::to_string(code)};
  std::istringstream csv(slurp(ws.root / "out" / "passk.csv"));
  std::string line;
  std::getline(csv, line);
  if (line != "method,k,value,seed") return {false, "unexpected header " + line};
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<long, double>>> curves;
  while (std::getline(csv, line)) {
    std::istringstream fields(line);
    std::string method, k, value, seed;
    std::getline(fields, method, ',');
    std::getline(fields, k, ',');
    std::getline(fields, value, ',');
    std::getline(fields, seed, ',');
    curves[{method, seed}].push_back({std::stol(k), std::stod(value)});
  }
  std::set<std::string> methods;
  bool monotone = true, grid_ok = true;
  for (const auto& [key, curve] : curves) {
    methods.insert(key.first);
    std::vector<std::int64_t> ks;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      ks.push_back(curve[i].first);
      if (i > 0) monotone = monotone && curve[i - 1].second <= curve[i].second;
    }
    grid_ok = grid_ok && ks == default_k_grid();
    std::cout << "  " << pad_right(key.first, 12) << " seed " << key.second << ": pass@1 "
              << format_fixed(curve.front().second, 4) << ", pass@256 " << format_fixed(curve.back().second, 4) << '\n';
  }
  const bool pass = monotone && grid_ok && methods == std::set<std::string>{"W-REINFORCE", "A-NSR"};
  return {pass, std::to_string(curves.size()) + " curves, methods present " + std::to_string(methods.size()) +
                    ", monotone " + (monotone ? "yes" : "no")};
}

// 12
Verdict determinism() {
  Workspace ws("determinism");
  write_configs(ws.root);
  const std::string w = (ws.root / "w.json").string();
  std::vector<std::string> mismatches;
  const auto twice = [&](const std::string& name, std::vector<std::string> args,
                         const std::vector<std::string>& files) {
    // Both runs write to the same directory so that echoed paths agree.
    const fs::path out = ws.root / name / "out";
    for (const char* run : {"r1", "r2"}) {
      auto full = args;
      full.push_back("--out");
      full.push_back(out.string());
      full.push_back("--quiet");
      if (run_cli_args(full) != 0) mismatches.push_back(name + " (failed)");
      fs::rename(out, ws.root / name / run);
    }
    for (const auto& f : files) {
      const fs::path a = ws.root / name / "r1" / f, b = ws.root / name / "r2" / f;
      if (!fs::exists(a) || slurp(a) != slurp(b)) mismatches.push_back(name + "/" + f);
    }
  };
  twice("train", {"train", "--config", w}, {"metrics.csv", "eval_report.json", "policy_final.json",
                                             "snapshots/policy_step_002000.json", "config.resolved.json"});
  const std::string policy = (ws.root / "train" / "r1" / "policy_final.json").string();
  twice("eval", {"eval", "--config", w, "--policy", policy}, {"eval_report.json", "eval_report.txt"});
  twice("gradcheck", {"gradcheck", "--configs-per-case", "3"}, {"gradcheck.txt"});
  twice("schedule", {"schedule-dump", "--config", (ws.root / "a.json").string()}, {"schedule.csv"});
  twice("compare", {"compare", "--config", w, "--config", (ws.root / "a.json").string()}, {"passk.csv"});
  std::string detail = mismatches.empty() ? "all outputs byte-identical across two runs" : "differences:";
  for (const auto& m : mismatches) detail += " " + m;
  return {mismatches.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, Criterion>> criteria{
      {"schedule endpoints", schedule_endpoints},
      {"gradient oracle suite", gradient_oracle},
      {"confidence-weighted NSR exactness", confidence_weighting},
      {"Pass@k correctness", pass_at_k_suite},
      {"entropy-rate scaling", entropy_rate},
      {"prior-guided redistribution", redistribution},
      {"implicit regularization", implicit_regularization},
      {"reduction identities", reductions},
      {"desk-scale training", desk_training},
      {"diversity-preservation direction", diversity_direction},
      {"non-reproducibility statement and compare machinery", compare_machinery},
      {"determinism", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (only != 0 && only != id) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail << " ("
              << format_fixed(secs, 2) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
