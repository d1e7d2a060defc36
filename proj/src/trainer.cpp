#include "nsrlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "nsrlab/errors.hpp"
#include "nsrlab/gradients.hpp"
#include "nsrlab/parallel.hpp"
#include "nsrlab/text.hpp"

namespace nsrlab {

namespace {

constexpr std::uint64_t kRolloutTag = 0x726f6c6cULL;
constexpr std::uint64_t kPromptTag = 0x70726f6dULL;
constexpr std::uint64_t kInitTag = 0x696e6974ULL;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<PromptId> choose_prompts(const TrainConfig& cfg, std::size_t step) {
  std::vector<PromptId> all(cfg.env.num_prompts);
  std::iota(all.begin(), all.end(), PromptId{0});
  if (cfg.prompts_per_batch >= all.size()) return all;
  Rng rng = Rng::substream(cfg.seed, {kPromptTag, step});
  for (std::size_t i = 0; i < cfg.prompts_per_batch; ++i) {
    const std::size_t j = i + rng.below(all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(cfg.prompts_per_batch);
  std::sort(all.begin(), all.end());
  return all;
}

double visited_entropy(std::span<const Rollout> batch, const PolicyTable& policy) {
  std::vector<double> probs(policy.vocab_size());
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : batch) {
    std::size_t node = 0;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      softmax_into<double>(policy.row(r.prompt, node), probs);
      total += step_entropy(probs);
      ++count;
      if (t + 1 < r.tokens.size()) node = policy.child(node, r.tokens[t]);
    }
  }
  return total / static_cast<double>(count);
}

double mean_correct_mass(const Environment& env, const PolicyTable& policy) {
  double total = 0.0;
  for (PromptId x = 0; x < env.num_prompts(); ++x) total += correct_mass(env, x, policy);
  return total / static_cast<double>(env.num_prompts());
}

double population_variance(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / n;
}

double norm_variance(std::span<const Rollout> batch, const PolicyTable& policy, const SampleWeights& w) {
  std::vector<double> norms;
  norms.reserve(batch.size());
  for (const auto& r : batch) norms.push_back(rollout_gradient_norm(r, policy, w));
  return population_variance(norms);
}

}  // namespace

void TrainConfig::validate() const {
  try {
    env.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("env", e.what());
  }
  objective.validate();
  if (prompts_per_batch < 1) throw ConfigError("training.prompts_per_batch", "must be at least 1");
  if (prompts_per_batch > env.num_prompts) {
    throw ConfigError("training.prompts_per_batch", "exceeds env.num_prompts");
  }
  if (rollouts_per_prompt < 1) throw ConfigError("training.rollouts_per_prompt", "must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("training.learning_rate", "must be a positive finite number");
  }
  if (inner_epochs < 1) throw ConfigError("training.inner_epochs", "must be at least 1");
  if (eval_every < 1) throw ConfigError("training.eval_every", "must be at least 1");
  if (!(p_correct_smoothing >= 0.0 && p_correct_smoothing < 1.0)) {
    throw ConfigError("training.p_correct_smoothing", "must lie in [0, 1)");
  }
  if (!(init_logit_scale >= 0.0) || !std::isfinite(init_logit_scale)) {
    throw ConfigError("training.init_logit_scale", "must be a non-negative finite number");
  }
  if (use_clipping && !objective.clip_epsilon) {
    throw ConfigError("objective.clip_epsilon", "required when training.use_clipping is set");
  }
}

std::vector<Rollout> collect_rollouts(const PolicyTable& policy, const Environment& env,
                                      std::span<const PromptId> prompts, std::size_t rollouts_per_prompt,
                                      std::uint64_t seed, std::size_t step,
                                      const ConfidenceParams& params, std::size_t threads) {
  std::vector<Rollout> batch(prompts.size() * rollouts_per_prompt);
  parallel_for(prompts.size(), threads, [&](std::size_t i) {
    const PromptId x = prompts[i];
    Rng rng = Rng::substream(seed, {kRolloutTag, step, x});
    for (std::size_t g = 0; g < rollouts_per_prompt; ++g) {
      const std::size_t id = i * rollouts_per_prompt + g;
      batch[id] = make_rollout(id, x, sample_sequence(policy, x, rng), env, params);
    }
  });
  return batch;
}

double grad_norm_variance(std::span<const Rollout> batch, const PolicyTable& policy,
                          const ObjectiveSpec& spec, double t, std::optional<double> p_correct) {
  if (batch.size() < 2) throw InvalidArgument("gradient-norm variance needs at least two rollouts");
  const double p = p_correct ? *p_correct : batch_correct_ratio(batch);
  return norm_variance(batch, policy, resolve_weights(spec, t, p));
}

TrainResult run_training(const TrainConfig& cfg) {
  cfg.validate();
  const Environment env(cfg.env);
  const std::size_t threads = effective_threads(cfg.threads);
  const ConfidenceParams conf_params = cfg.objective.confidence.value_or(ConfidenceParams{});

  TrainResult result;
  if (cfg.init_logit_scale > 0.0) {
    Rng init = Rng::substream(cfg.seed, {kInitTag});
    result.policy = PolicyTable::random(env.shape(), init, cfg.init_logit_scale);
  } else {
    result.policy = PolicyTable::uniform(env.shape());
  }
  PolicyTable& policy = result.policy;
  result.metrics.reserve(cfg.total_steps);

  std::optional<double> smoothed;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const auto prompts = choose_prompts(cfg, step);
    const std::vector<Rollout> batch = collect_rollouts(policy, env, prompts, cfg.rollouts_per_prompt,
                                                        cfg.seed, step, conf_params, threads);

    const double p_hat = batch_correct_ratio(batch);
    const double p_used = (smoothed && cfg.p_correct_smoothing > 0.0)
                              ? cfg.p_correct_smoothing * *smoothed + (1.0 - cfg.p_correct_smoothing) * p_hat
                              : p_hat;
    smoothed = p_used;
    const double t = static_cast<double>(step);
    const SampleWeights w = resolve_weights(cfg.objective, t, p_used);

    MetricsRow row;
    row.step = step;
    row.lambda_t = cfg.objective.adaptive() ? w.schedule.lambda_t : w.positive;
    row.beta_t = cfg.objective.adaptive() ? w.schedule.beta_t : w.negative;
    row.rho_t = row.beta_t / row.lambda_t;
    row.p_correct = p_hat;
    row.entropy = visited_entropy(batch, policy);
    row.loss = cfg.use_clipping ? clipped_mc_loss_t<double>(batch, policy, w, *cfg.objective.clip_epsilon)
                                : mc_loss_t<double>(batch, policy, w);
    double conf_sum = 0.0;
    std::size_t incorrect = 0;
    for (const auto& r : batch) {
      if (r.reward == Reward::Incorrect) {
        conf_sum += r.confidence;
        ++incorrect;
      }
    }
    row.mean_conf_incorrect = incorrect > 0 ? conf_sum / static_cast<double>(incorrect) : kNaN;
    row.gradnorm_var = batch.size() >= 2 ? norm_variance(batch, policy, w) : kNaN;

    // Rollouts stay fixed across inner epochs; their behavior probabilities
    // are what the clipped ratio divides by.
    const std::size_t mb = cfg.minibatch_size == 0 ? batch.size() : std::min(cfg.minibatch_size, batch.size());
    const std::span<const Rollout> all(batch);
    for (std::size_t epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      for (std::size_t begin = 0; begin < batch.size(); begin += mb) {
        const auto part = all.subspan(begin, std::min(mb, batch.size() - begin));
        const GradTable g = cfg.use_clipping
                                ? clipped_batch_gradient(part, policy, w, *cfg.objective.clip_epsilon)
                                : batch_gradient(part, policy, w);
        apply_update_in_place(policy, g, cfg.learning_rate);
      }
    }
    policy.check_finite();

    row.correct_mass = cfg.track_exact ? mean_correct_mass(env, policy) : kNaN;
    result.metrics.push_back(row);
    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.total_steps) {
      result.snapshots.push_back({step + 1, policy});
    }
  }
  return result;
}

std::string metrics_csv_header() {
  return "step,loss,lambda,beta,rho,p_correct,entropy,correct_mass,mean_conf_incorrect,gradnorm_var";
}

std::string format_metrics_row(const MetricsRow& r) {
  std::string line = std::to_string(r.step);
  for (double v : {r.loss, r.lambda_t, r.beta_t, r.rho_t, r.p_correct, r.entropy, r.correct_mass,
                   r.mean_conf_incorrect, r.gradnorm_var}) {
    line += ',';
    line += format_double(v);
  }
  return line;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << metrics_csv_header() << '\n';
  for (const auto& r : rows) out << format_metrics_row(r) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::size_t effective_threads(std::size_t requested) {
  std::size_t n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* cap = std::getenv("NSRLAB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(cap, &end, 10);
    if (end != cap && *end == '\0' && v >= 1) n = std::min<std::size_t>(n, v);
  }
  return n;
}

}  // namespace nsrlab
