#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsrlab/environment.hpp"
#include "nsrlab/objectives.hpp"
#include "nsrlab/policy.hpp"

namespace nsrlab {

struct TrainConfig {
  EnvSpec env;
  ObjectiveSpec objective;
  std::size_t total_steps = 2000;
  std::size_t prompts_per_batch = 8;
  std::size_t rollouts_per_prompt = 8;
  double learning_rate = 5.0;
  std::uint64_t seed = 0;
  bool use_clipping = true;
  std::size_t inner_epochs = 1;
  /// Rollouts per gradient step inside an epoch; 0 uses the whole batch.
  std::size_t minibatch_size = 0;
  std::size_t eval_every = 100;
  /// Log the exact correct mass (by enumeration) every step.
  bool track_exact = true;
  /// Exponential smoothing of the batch correct ratio fed to the
  /// performance-driven schedule; 0 uses the current batch only.
  double p_correct_smoothing = 0.0;
  /// Initial logits ~ N(0, scale^2); 0 starts from the uniform policy.
  double init_logit_scale = 0.0;
  std::size_t threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lambda_t = 0.0;
  double beta_t = 0.0;
  double rho_t = 0.0;
  double p_correct = 0.0;
  /// Mean step entropy over the nodes visited by the batch.
  double entropy = 0.0;
  /// Mean exact correct mass over prompts; NaN when not tracked.
  double correct_mass = 0.0;
  /// NaN when the batch has no incorrect rollouts.
  double mean_conf_incorrect = 0.0;
  double gradnorm_var = 0.0;
};

struct Snapshot {
  std::size_t step = 0;  // number of updates applied
  PolicyTable policy;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<Snapshot> snapshots;
  PolicyTable policy;
};

/// Samples `rollouts_per_prompt` responses for each prompt under `policy`,
/// each prompt drawing from its own (seed, step, prompt) substream.
std::vector<Rollout> collect_rollouts(const PolicyTable& policy, const Environment& env,
                                      std::span<const PromptId> prompts, std::size_t rollouts_per_prompt,
                                      std::uint64_t seed, std::size_t step,
                                      const ConfidenceParams& params, std::size_t threads = 1);

/// Population variance of the per-rollout gradient norms. Needs at least two rollouts.
double grad_norm_variance(std::span<const Rollout> batch, const PolicyTable& policy,
                          const ObjectiveSpec& spec, double t,
                          std::optional<double> p_correct = std::nullopt);

TrainResult run_training(const TrainConfig& config);

std::string metrics_csv_header();
std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

}  // namespace nsrlab
