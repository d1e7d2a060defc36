#include "nsrlab/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "nsrlab/gradients.hpp"
#include "nsrlab/objectives.hpp"
#include "nsrlab/text.hpp"

namespace nsrlab {

namespace {

enum class Mode { Sampled, ClippedOnPolicy, Exact };

struct Case {
  std::string label;
  Mode mode;
  std::optional<Family> family;  // nullopt: drawn per configuration
  std::optional<ScheduleKind> schedule;
};

std::vector<Case> all_cases() {
  return {
      {"PSR-only", Mode::Sampled, Family::PsrOnly, {}},
      {"NSR-only", Mode::Sampled, Family::NsrOnly, {}},
      {"RLVR", Mode::Sampled, Family::RLVR, {}},
      {"W-REINFORCE", Mode::Sampled, Family::WReinforce, {}},
      {"A-NSR exponential-linear", Mode::Sampled, Family::ANsr, ScheduleKind::ExponentialLinear},
      {"A-NSR cosine", Mode::Sampled, Family::ANsr, ScheduleKind::Cosine},
      {"A-NSR performance-driven", Mode::Sampled, Family::ANsr, ScheduleKind::PerformanceDriven},
      {"CW-NSR", Mode::Sampled, Family::CwNsr, {}},
      {"A-CW-NSR", Mode::Sampled, Family::ACwNsr, ScheduleKind::ExponentialLinear},
      {"clipped on-policy", Mode::ClippedOnPolicy, {}, {}},
      {"exact PSR-only", Mode::Exact, Family::PsrOnly, {}},
      {"exact NSR-only", Mode::Exact, Family::NsrOnly, {}},
      {"exact W-REINFORCE", Mode::Exact, Family::WReinforce, {}},
      {"exact A-NSR cosine", Mode::Exact, Family::ANsr, ScheduleKind::Cosine},
      {"exact CW-NSR (frozen weights)", Mode::Exact, Family::CwNsr, {}},
  };
}

EnvSpec random_env(Rng& rng) {
  EnvSpec env;
  env.vocab_size = 2 + rng.below(4);
  env.seq_len = 1 + rng.below(3);
  env.num_prompts = 1 + rng.below(3);
  env.rule = VerifierRule::ModSum;
  for (std::size_t x = 0; x < env.num_prompts; ++x) {
    env.targets.push_back(static_cast<TokenId>(rng.below(env.vocab_size)));
  }
  return env;
}

ObjectiveSpec random_objective(Family family, std::optional<ScheduleKind> kind, Rng& rng) {
  ObjectiveSpec spec;
  spec.family = family;
  spec.lambda = 0.05 + 0.3 * rng.uniform();
  ScheduleSpec schedule;
  schedule.kind = kind.value_or(ScheduleKind::ExponentialLinear);
  schedule.total_steps = 50 + static_cast<std::int64_t>(rng.below(451));
  schedule.kappa = 0.005 + 0.05 * rng.uniform();
  spec.schedule = schedule;
  spec.confidence = ConfidenceParams{0.3 + 1.7 * rng.uniform(), 0.05 + 0.4 * rng.uniform()};
  return spec;
}

constexpr Family kAllFamilies[] = {Family::RLVR,       Family::PsrOnly, Family::NsrOnly,
                                   Family::WReinforce, Family::ANsr,    Family::CwNsr,
                                   Family::ACwNsr};

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.passed; });
}

std::size_t GradcheckReport::sampled_configs() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.sampled ? r.configs : 0;
  return n;
}

double GradcheckReport::max_rel_error(bool sampled_only) const {
  double m = 0.0;
  for (const auto& r : rows) {
    if (!sampled_only || r.sampled) m = std::max(m, r.max_rel_error);
  }
  return m;
}

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;
  const auto cases = all_cases();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    GradcheckRow row;
    row.label = c.label;
    row.sampled = c.mode != Mode::Exact;
    for (std::size_t k = 0; k < options.configs_per_case; ++k) {
      Rng rng = Rng::substream(options.seed, {0x67726164ULL, ci, k});
      const Environment env(options.env ? *options.env : random_env(rng));
      const PolicyTable policy = PolicyTable::random(env.shape(), rng, 0.5 + rng.uniform());
      const Family family = c.family ? *c.family : kAllFamilies[rng.below(std::size(kAllFamilies))];
      const ObjectiveSpec spec = random_objective(family, c.schedule, rng);
      const double t = static_cast<double>(rng.below(static_cast<std::uint64_t>(spec.schedule->total_steps) + 1));

      LossFunctional loss;
      GradTable analytic;
      std::vector<Probe> probes;
      std::vector<Rollout> batch;
      HardnessTable frozen;
      if (c.mode == Mode::Exact) {
        const double p_correct = rng.uniform();
        const SampleWeights w = resolve_weights(spec, t, p_correct);
        const HardnessTable* frozen_ptr = nullptr;
        if (w.use_hardness) {
          frozen = exact_hardness_table(policy, env, *spec.confidence);
          frozen_ptr = &frozen;
        }
        analytic = exact_gradient(policy, env, w, frozen_ptr);
        loss = [&env, w, frozen_ptr](const PolicyTable& p) {
          return exact_weighted_loss_t<FdReal>(p, env, w, frozen_ptr, nullptr);
        };
        probes = random_probes(env.shape(), rng, options.probes_per_config);
      } else {
        const std::size_t per_prompt = 2 + rng.below(5);
        for (PromptId x = 0; x < env.num_prompts(); ++x) {
          for (std::size_t g = 0; g < per_prompt; ++g) {
            batch.push_back(make_rollout(batch.size(), x, sample_sequence(policy, x, rng), env,
                                         *spec.confidence));
          }
        }
        const SampleWeights w = resolve_weights(spec, t, batch_correct_ratio(batch));
        if (c.mode == Mode::Sampled) {
          analytic = batch_gradient(batch, policy, w);
          loss = [&batch, w](const PolicyTable& p) { return mc_loss_t<FdReal>(batch, p, w); };
        } else {
          const double eps = *spec.clip_epsilon;
          analytic = clipped_batch_gradient(batch, policy, w, eps);
          loss = [&batch, w, eps](const PolicyTable& p) {
            return clipped_mc_loss_t<FdReal>(batch, p, w, eps);
          };
        }
        probes = visited_probes(batch, policy, rng, options.probes_per_config);
      }
      const FdReport fd = finite_difference_check(loss, policy, analytic, probes, options.step);
      if (fd.max_rel_error > row.max_rel_error) {
        row.max_rel_error = fd.max_rel_error;
        row.worst_analytic = fd.worst_analytic;
        row.worst_numeric = fd.worst_numeric;
      }
      row.probes += fd.probes;
      ++row.configs;
    }
    row.passed = row.max_rel_error <= options.tolerance;
    report.rows.push_back(row);
  }
  return report;
}

std::string format_gradcheck_table(const GradcheckReport& report) {
  std::ostringstream out;
  out << pad_right("case", 32) << pad_left("configs", 8) << pad_left("probes", 8)
      << pad_left("max rel err", 14) << "  status\n";
  for (const auto& r : report.rows) {
    out << pad_right(r.label, 32) << pad_left(std::to_string(r.configs), 8)
        << pad_left(std::to_string(r.probes), 8) << pad_left(format_scientific(r.max_rel_error, 3), 14)
        << "  " << (r.passed ? "ok" : "FAIL") << '\n';
  }
  out << "tolerance " << format_scientific(report.tolerance, 1) << ", sampled-batch configurations "
      << report.sampled_configs() << ", overall " << (report.passed() ? "PASS" : "FAIL") << '\n';
  return out.str();
}

}  // namespace nsrlab
