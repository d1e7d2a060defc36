#include "nsrlab/objectives.hpp"

#include "nsrlab/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsrlab {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::RLVR: return "RLVR";
    case Family::PsrOnly: return "PSR-only";
    case Family::NsrOnly: return "NSR-only";
    case Family::WReinforce: return "W-REINFORCE";
    case Family::ANsr: return "A-NSR";
    case Family::CwNsr: return "CW-NSR";
    case Family::ACwNsr: return "A-CW-NSR";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::RLVR, Family::PsrOnly, Family::NsrOnly, Family::WReinforce, Family::ANsr,
                   Family::CwNsr, Family::ACwNsr}) {
    if (name == to_string(f)) return f;
  }
  throw ConfigError("objective.family", "unknown objective family \"" + std::string(name) + "\"");
}

void ObjectiveSpec::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("objective.lambda", "must be positive");
  if (adaptive() && !schedule) {
    throw ConfigError("objective.family",
                      std::string(to_string(family)) + " requires a `schedule` section");
  }
  if (confidence_weighted() && !confidence) {
    throw ConfigError("objective.family",
                      std::string(to_string(family)) + " requires a `confidence` section");
  }
  if (schedule) {
    try {
      schedule->validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("schedule", e.what());
    }
  }
  if (confidence) {
    try {
      confidence->validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("confidence", e.what());
    }
  }
  if (clip_epsilon && !(*clip_epsilon > 0.0 && *clip_epsilon < 1.0)) {
    throw ConfigError("objective.clip_epsilon", "must lie in (0, 1)");
  }
}

Rollout make_rollout(std::size_t id, PromptId prompt, SampledSequence sample, const Environment& env,
                     const ConfidenceParams& params) {
  Rollout r;
  r.id = id;
  r.prompt = prompt;
  r.reward = env.verify(prompt, sample.tokens);
  r.tokens = std::move(sample.tokens);
  r.behavior_probs = std::move(sample.per_token);
  r.confidence = confidence(r.behavior_probs);
  r.hardness_weight = r.reward == Reward::Incorrect ? hardness(r.confidence, params) : 1.0;
  return r;
}

SampleWeights resolve_weights(const ObjectiveSpec& spec, double t, std::optional<double> p_correct,
                              Diagnostics* diag) {
  SampleWeights w;
  switch (spec.family) {
    case Family::RLVR:
      break;
    case Family::PsrOnly:
      w.negative = 0.0;
      break;
    case Family::NsrOnly:
      w.positive = 0.0;
      break;
    case Family::WReinforce:
    case Family::CwNsr:
      w.positive = spec.lambda;
      break;
    case Family::ANsr:
    case Family::ACwNsr:
      if (!spec.schedule) {
        throw ConfigError("objective.family",
                          std::string(to_string(spec.family)) + " requires a `schedule` section");
      }
      w.schedule = schedule_weights(t, *spec.schedule, p_correct, diag);
      w.positive = w.schedule.lambda_t;
      w.negative = w.schedule.beta_t;
      break;
  }
  if (spec.confidence_weighted()) {
    if (!spec.confidence) {
      throw ConfigError("objective.family",
                        std::string(to_string(spec.family)) + " requires a `confidence` section");
    }
    w.use_hardness = true;
  }
  return w;
}

double rollout_coefficient(const SampleWeights& weights, const Rollout& rollout) {
  if (rollout.reward == Reward::Correct) return weights.positive;
  return weights.use_hardness ? weights.negative * rollout.hardness_weight : weights.negative;
}

double batch_correct_ratio(std::span<const Rollout> batch) {
  if (batch.empty()) throw InvalidArgument("correct ratio of an empty batch");
  std::size_t correct = 0;
  for (const auto& r : batch) correct += r.reward == Reward::Correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

namespace {

void check_rollout(const PolicyTable& policy, const Rollout& r) {
  policy.check_prompt(r.prompt);
  if (r.tokens.size() != policy.seq_len() || r.behavior_probs.size() != policy.seq_len()) {
    throw InconsistentPolicy("rollout " + std::to_string(r.id) + " does not match policy depth");
  }
}

/// Current-policy probability of each sampled token along the rollout.
template <class Real>
void current_token_probs(const PolicyTable& policy, const Rollout& r, std::vector<Real>& scratch,
                         std::vector<Real>& out) {
  const std::size_t V = policy.vocab_size();
  scratch.resize(V);
  out.resize(r.tokens.size());
  std::size_t node = 0;
  for (std::size_t t = 0; t < r.tokens.size(); ++t) {
    if (r.tokens[t] >= V) throw InconsistentPolicy("rollout token outside vocabulary");
    softmax_into<Real>(policy.row(r.prompt, node), scratch);
    out[t] = scratch[r.tokens[t]];
    if (t + 1 < r.tokens.size()) node = policy.child(node, r.tokens[t]);
  }
}

}  // namespace

template <class Real>
Real mc_loss_t(std::span<const Rollout> batch, const PolicyTable& policy, const SampleWeights& weights) {
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  std::vector<Real> scratch, probs;
  Real total = 0;
  for (const auto& r : batch) {
    check_rollout(policy, r);
    current_token_probs<Real>(policy, r, scratch, probs);
    Real mean_prob = 0;
    for (Real p : probs) mean_prob += p;
    mean_prob /= static_cast<Real>(probs.size());
    const Real coef = static_cast<Real>(rollout_coefficient(weights, r));
    total += -coef * static_cast<Real>(reward_value(r.reward)) * mean_prob;
  }
  return total / static_cast<Real>(batch.size());
}

template double mc_loss_t<double>(std::span<const Rollout>, const PolicyTable&, const SampleWeights&);
template long double mc_loss_t<long double>(std::span<const Rollout>, const PolicyTable&,
                                            const SampleWeights&);
template FdReal mc_loss_t<FdReal>(std::span<const Rollout>, const PolicyTable&, const SampleWeights&);

double mc_loss(std::span<const Rollout> batch, const PolicyTable& policy, const ObjectiveSpec& spec,
               double t, std::optional<double> p_correct) {
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  if (!p_correct) p_correct = batch_correct_ratio(batch);
  return mc_loss_t<double>(batch, policy, resolve_weights(spec, t, p_correct));
}

template <class Real>
Real clipped_mc_loss_t(std::span<const Rollout> batch, const PolicyTable& policy,
                       const SampleWeights& weights, double clip_epsilon) {
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  const Real lo = static_cast<Real>(1.0 - clip_epsilon);
  const Real hi = static_cast<Real>(1.0 + clip_epsilon);
  std::vector<Real> scratch, probs;
  Real total = 0;
  for (const auto& r : batch) {
    check_rollout(policy, r);
    current_token_probs<Real>(policy, r, scratch, probs);
    Real acc = 0;
    for (std::size_t t = 0; t < probs.size(); ++t) {
      const Real ratio = probs[t] / static_cast<Real>(r.behavior_probs[t]);
      if (!std::isfinite(static_cast<double>(ratio))) {
        throw NumericalError("non-finite importance ratio in rollout " + std::to_string(r.id));
      }
      const Real clipped = std::clamp(ratio, lo, hi);
      if (r.reward == Reward::Correct) {
        acc += std::min(ratio, clipped);
      } else {
        acc += std::min(-ratio, -clipped);
      }
    }
    const Real coef = static_cast<Real>(rollout_coefficient(weights, r));
    total += -coef * acc / static_cast<Real>(probs.size());
  }
  return total / static_cast<Real>(batch.size());
}

template double clipped_mc_loss_t<double>(std::span<const Rollout>, const PolicyTable&,
                                          const SampleWeights&, double);
template long double clipped_mc_loss_t<long double>(std::span<const Rollout>, const PolicyTable&,
                                                    const SampleWeights&, double);
template FdReal clipped_mc_loss_t<FdReal>(std::span<const Rollout>, const PolicyTable&, const SampleWeights&,
                                          double);

double clipped_mc_loss(std::span<const Rollout> batch, const PolicyTable& current,
                       const ObjectiveSpec& spec, double t, std::optional<double> p_correct) {
  if (!spec.clip_epsilon) throw ConfigError("objective.clip_epsilon", "required for clipped losses");
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  if (!p_correct) p_correct = batch_correct_ratio(batch);
  return clipped_mc_loss_t<double>(batch, current, resolve_weights(spec, t, p_correct),
                                   *spec.clip_epsilon);
}

namespace {

void check_env(const PolicyTable& policy, const Environment& env) {
  if (policy.shape() != env.shape()) throw InconsistentPolicy("policy shape does not match environment");
}

}  // namespace

double exact_psr_loss(const PolicyTable& policy, const Environment& env) {
  check_env(policy, env);
  double total = 0.0;
  for (PromptId x = 0; x < env.num_prompts(); ++x) total += correct_mass(env, x, policy);
  return -total / static_cast<double>(env.num_prompts());
}

double exact_nsr_loss(const PolicyTable& policy, const Environment& env) {
  check_env(policy, env);
  double total = 0.0;
  for (PromptId x = 0; x < env.num_prompts(); ++x) total += incorrect_mass(env, x, policy);
  return total / static_cast<double>(env.num_prompts());
}

double exact_rlvr_loss(const PolicyTable& policy, const Environment& env) {
  // -E_x E_y[r(x, y)]: each response contributes -r * pi(y).
  check_env(policy, env);
  double total = 0.0;
  for (PromptId x = 0; x < env.num_prompts(); ++x) {
    enumerate_sequences<double>(policy, x, [&](const EnumeratedSequence<double>& s) {
      total += (env.is_correct(x, s.index) ? -1.0 : 1.0) * s.prob;
    });
  }
  return total / static_cast<double>(env.num_prompts());
}

HardnessTable exact_hardness_table(const PolicyTable& policy, const Environment& env,
                                   const ConfidenceParams& params) {
  check_env(policy, env);
  HardnessTable table(env.num_prompts(), std::vector<double>(env.num_sequences(), 1.0));
  for (PromptId x = 0; x < env.num_prompts(); ++x) {
    enumerate_sequences<double>(policy, x, [&](const EnumeratedSequence<double>& s) {
      if (!env.is_correct(x, s.index)) {
        table[x][s.index] = hardness(confidence(s.token_probs), params);
      }
    });
  }
  return table;
}

template <class Real>
Real exact_weighted_loss_t(const PolicyTable& policy, const Environment& env,
                           const SampleWeights& weights, const HardnessTable* frozen,
                           const ConfidenceParams* params) {
  check_env(policy, env);
  if (weights.use_hardness && !frozen && !params) {
    throw InvalidArgument("confidence weighting needs either frozen weights or parameters");
  }
  if (frozen && (frozen->size() != env.num_prompts())) {
    throw InconsistentPolicy("frozen hardness table does not match environment");
  }
  Real total = 0;
  std::vector<double> token_probs(env.seq_len());
  for (PromptId x = 0; x < env.num_prompts(); ++x) {
    Real acc = 0;
    enumerate_sequences<Real>(policy, x, [&](const EnumeratedSequence<Real>& s) {
      if (env.is_correct(x, s.index)) {
        acc -= static_cast<Real>(weights.positive) * s.prob;
        return;
      }
      double h = 1.0;
      if (weights.use_hardness) {
        if (frozen) {
          h = (*frozen)[x].at(s.index);
        } else {
          for (std::size_t t = 0; t < token_probs.size(); ++t) {
            token_probs[t] = static_cast<double>(s.token_probs[t]);
          }
          h = hardness(confidence(token_probs), *params);
        }
      }
      acc += static_cast<Real>(weights.negative * h) * s.prob;
    });
    total += acc;
  }
  return total / static_cast<Real>(env.num_prompts());
}

template double exact_weighted_loss_t<double>(const PolicyTable&, const Environment&,
                                              const SampleWeights&, const HardnessTable*,
                                              const ConfidenceParams*);
template long double exact_weighted_loss_t<long double>(const PolicyTable&, const Environment&,
                                                        const SampleWeights&, const HardnessTable*,
                                                        const ConfidenceParams*);
template FdReal exact_weighted_loss_t<FdReal>(const PolicyTable&, const Environment&, const SampleWeights&,
                                              const HardnessTable*, const ConfidenceParams*);

double weighted_loss(const PolicyTable& policy, const Environment& env, const ObjectiveSpec& spec,
                     double t, std::optional<double> p_correct, const HardnessTable* frozen) {
  spec.validate();
  const SampleWeights w = resolve_weights(spec, t, p_correct);
  return exact_weighted_loss_t<double>(policy, env, w, frozen,
                                       spec.confidence ? &*spec.confidence : nullptr);
}

std::vector<double> entropy_bonus_grad(const Distribution& dist) {
  double mean_log = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) mean_log += p * std::log(p);
  }
  std::vector<double> g(dist.size(), 0.0);
  for (std::size_t v = 0; v < dist.size(); ++v) {
    const double p = dist[v];
    if (p > 0.0) g[v] = -p * (std::log(p) - mean_log);
  }
  return g;
}

std::vector<double> unlikelihood_grad(const Distribution& dist, TokenId sampled) {
  if (sampled >= dist.size()) throw InvalidArgument("sampled token outside vocabulary");
  const double py = dist[sampled];
  if (py >= 1.0 - 1e-12) {
    throw NumericalError("unlikelihood gradient is singular when the sampled token has probability 1");
  }
  const double factor = py / (1.0 - py);
  std::vector<double> g(dist.size());
  for (std::size_t v = 0; v < dist.size(); ++v) {
    g[v] = v == sampled ? -dist[v] : factor * dist[v];
  }
  return g;
}

}  // namespace nsrlab
