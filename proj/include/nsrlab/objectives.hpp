#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nsrlab/confidence.hpp"
#include "nsrlab/environment.hpp"
#include "nsrlab/policy.hpp"
#include "nsrlab/schedules.hpp"

namespace nsrlab {

enum class Family {
  RLVR,        // L_PSR + L_NSR
  PsrOnly,
  NsrOnly,
  WReinforce,  // lambda * L_PSR + L_NSR
  ANsr,        // lambda(t) * L_PSR + beta(t) * L_NSR
  CwNsr,       // lambda * L_PSR + hardness-weighted NSR
  ACwNsr,      // lambda(t) * L_PSR + beta(t) * hardness-weighted NSR (experimental)
};

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

struct ObjectiveSpec {
  Family family = Family::WReinforce;
  double lambda = 0.1;
  std::optional<ScheduleSpec> schedule;
  std::optional<ConfidenceParams> confidence;
  std::optional<double> clip_epsilon = 0.2;

  bool adaptive() const { return family == Family::ANsr || family == Family::ACwNsr; }
  bool confidence_weighted() const { return family == Family::CwNsr || family == Family::ACwNsr; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// A sampled response with everything recorded at sampling time. The
/// confidence and hardness weight come from the behavior policy and are
/// plain numbers: no gradient ever flows through them.
struct Rollout {
  std::size_t id = 0;
  PromptId prompt = 0;
  Sequence tokens;
  std::vector<double> behavior_probs;
  Reward reward = Reward::Incorrect;
  double confidence = 1.0;
  /// In [epsilon_floor, 1] for incorrect responses; 1 for correct ones.
  double hardness_weight = 1.0;
};

Rollout make_rollout(std::size_t id, PromptId prompt, SampledSequence sample, const Environment& env,
                     const ConfidenceParams& params);

/// Per-sample multipliers resolved for one optimizer step.
struct SampleWeights {
  double positive = 1.0;
  double negative = 1.0;
  bool use_hardness = false;
  WeightPair schedule{};
};

SampleWeights resolve_weights(const ObjectiveSpec& spec, double t,
                              std::optional<double> p_correct = std::nullopt,
                              Diagnostics* diag = nullptr);

/// Non-negative multiplier on a rollout's loss term: the positive weight for
/// correct rollouts, the negative weight (times hardness when enabled) for
/// incorrect ones.
double rollout_coefficient(const SampleWeights& weights, const Rollout& rollout);

/// Fraction of rollouts rewarded +1. Throws on an empty batch.
double batch_correct_ratio(std::span<const Rollout> batch);

// Monte Carlo surrogate: mean over rollouts of
//   -coef * R * (1/T) * sum_t pi(y_t | x, y_<t)
// with pi the current policy.
template <class Real>
Real mc_loss_t(std::span<const Rollout> batch, const PolicyTable& policy, const SampleWeights& weights);

/// When `p_correct` is absent the batch's own correct ratio is used.
double mc_loss(std::span<const Rollout> batch, const PolicyTable& policy, const ObjectiveSpec& spec,
               double t, std::optional<double> p_correct = std::nullopt);

// Clipped surrogate with ratio r_t = pi(y_t) / pi_old(y_t):
//   correct:   -coef * (1/T) * sum_t min(r_t, clip(r_t, 1 - eps, 1 + eps))
//   incorrect: -coef * (1/T) * sum_t min(-r_t, -clip(r_t, 1 - eps, 1 + eps))
template <class Real>
Real clipped_mc_loss_t(std::span<const Rollout> batch, const PolicyTable& policy,
                       const SampleWeights& weights, double clip_epsilon);

double clipped_mc_loss(std::span<const Rollout> batch, const PolicyTable& current,
                       const ObjectiveSpec& spec, double t,
                       std::optional<double> p_correct = std::nullopt);

// Exact objectives by enumeration, averaged uniformly over prompts.
double exact_psr_loss(const PolicyTable& policy, const Environment& env);
double exact_nsr_loss(const PolicyTable& policy, const Environment& env);
double exact_rlvr_loss(const PolicyTable& policy, const Environment& env);

/// hardness(Conf(y)) for every response of every prompt: [prompt][sequence index].
using HardnessTable = std::vector<std::vector<double>>;
HardnessTable exact_hardness_table(const PolicyTable& policy, const Environment& env,
                                   const ConfidenceParams& params);

/// Exact mean over prompts of
///   -positive * sum_{correct} pi(y) + negative * sum_{incorrect} h(y) pi(y)
/// where h(y) is 1, or the hardness weight when enabled. Hardness is taken
/// from `frozen` when given, otherwise recomputed from `policy`.
template <class Real>
Real exact_weighted_loss_t(const PolicyTable& policy, const Environment& env,
                           const SampleWeights& weights, const HardnessTable* frozen,
                           const ConfidenceParams* params);

double weighted_loss(const PolicyTable& policy, const Environment& env, const ObjectiveSpec& spec,
                     double t, std::optional<double> p_correct = std::nullopt,
                     const HardnessTable* frozen = nullptr);

/// dH/dz_v = -pi_v (log pi_v - sum_u pi_u log pi_u).
std::vector<double> entropy_bonus_grad(const Distribution& dist);

/// Unlikelihood descent direction: -pi_v at the sampled token and
/// pi_y / (1 - pi_y) * pi_v elsewhere. Throws NumericalError when the
/// sampled token has probability 1 within 1e-12.
std::vector<double> unlikelihood_grad(const Distribution& dist, TokenId sampled);

}  // namespace nsrlab
