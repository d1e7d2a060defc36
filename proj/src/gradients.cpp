#include "nsrlab/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsrlab {

std::vector<double> psr_token_grad(const Distribution& dist, TokenId sampled) {
  if (sampled >= dist.size()) throw InvalidArgument("sampled token outside vocabulary");
  const double py = dist[sampled];
  std::vector<double> g(dist.size());
  for (std::size_t v = 0; v < dist.size(); ++v) {
    g[v] = v == sampled ? py * (1.0 - py) : -py * dist[v];
  }
  return g;
}

std::vector<double> nsr_token_grad(const Distribution& dist, TokenId sampled) {
  auto g = psr_token_grad(dist, sampled);
  for (double& x : g) x = -x;
  return g;
}

std::vector<double> cwnsr_token_grad(const Distribution& dist, TokenId sampled, double w) {
  auto g = nsr_token_grad(dist, sampled);
  for (double& x : g) x *= w;
  return g;
}

namespace {

void check_batch(std::span<const Rollout> batch, const PolicyTable& policy) {
  if (batch.empty()) throw InvalidArgument("gradient of an empty batch");
  for (const auto& r : batch) {
    policy.check_prompt(r.prompt);
    if (r.tokens.size() != policy.seq_len() || r.behavior_probs.size() != policy.seq_len()) {
      throw InconsistentPolicy("rollout " + std::to_string(r.id) + " does not match policy depth");
    }
  }
}

// Adds scale * pi_y * (e_y - pi) to `row`, i.e. scale * d pi_y / dz.
void add_prob_gradient(std::span<double> row, std::span<const double> probs, TokenId y, double scale) {
  const double py = probs[y];
  for (std::size_t v = 0; v < row.size(); ++v) {
    row[v] += scale * py * ((v == y ? 1.0 : 0.0) - probs[v]);
  }
}

}  // namespace

GradTable batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                         const SampleWeights& weights) {
  check_batch(batch, policy);
  GradTable grad(policy.shape());
  std::vector<double> probs(policy.vocab_size());
  const double inv_nt = 1.0 / static_cast<double>(batch.size() * policy.seq_len());
  for (const auto& r : batch) {
    const double coef = rollout_coefficient(weights, r);
    if (coef == 0.0) continue;
    // d/dz of -coef * R * pi(y_t) / (N T)
    const double scale = -coef * reward_value(r.reward) * inv_nt;
    std::size_t node = 0;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      softmax_into<double>(policy.row(r.prompt, node), probs);
      add_prob_gradient(grad.row(r.prompt, node), probs, r.tokens[t], scale);
      if (t + 1 < r.tokens.size()) node = policy.child(node, r.tokens[t]);
    }
  }
  return grad;
}

GradTable batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                         const ObjectiveSpec& spec, double t, std::optional<double> p_correct) {
  if (batch.empty()) throw InvalidArgument("gradient of an empty batch");
  if (!p_correct) p_correct = batch_correct_ratio(batch);
  return batch_gradient(batch, policy, resolve_weights(spec, t, p_correct));
}

GradTable clipped_batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                                 const SampleWeights& weights, double clip_epsilon) {
  check_batch(batch, policy);
  GradTable grad(policy.shape());
  std::vector<double> probs(policy.vocab_size());
  const double inv_nt = 1.0 / static_cast<double>(batch.size() * policy.seq_len());
  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  for (const auto& r : batch) {
    const double coef = rollout_coefficient(weights, r);
    if (coef == 0.0) continue;
    const double reward = reward_value(r.reward);
    std::size_t node = 0;
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      softmax_into<double>(policy.row(r.prompt, node), probs);
      const TokenId y = r.tokens[t];
      const double old = r.behavior_probs[t];
      const double ratio = probs[y] / old;
      if (!std::isfinite(ratio)) {
        throw NumericalError("non-finite importance ratio in rollout " + std::to_string(r.id));
      }
      // The unclipped branch carries the gradient: ratio <= 1 + eps for
      // correct samples, ratio >= 1 - eps for incorrect ones.
      const bool active = r.reward == Reward::Correct ? ratio <= hi : ratio >= lo;
      if (active) {
        // d/dz of -coef * R * ratio / (N T), with d ratio = d pi_y / pi_old.
        add_prob_gradient(grad.row(r.prompt, node), probs, y, -coef * reward * inv_nt / old);
      }
      if (t + 1 < r.tokens.size()) node = policy.child(node, y);
    }
  }
  return grad;
}

GradTable clipped_batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                                 const ObjectiveSpec& spec, double t, std::optional<double> p_correct) {
  if (!spec.clip_epsilon) throw ConfigError("objective.clip_epsilon", "required for clipped losses");
  if (batch.empty()) throw InvalidArgument("gradient of an empty batch");
  if (!p_correct) p_correct = batch_correct_ratio(batch);
  return clipped_batch_gradient(batch, policy, resolve_weights(spec, t, p_correct), *spec.clip_epsilon);
}

GradTable exact_gradient(const PolicyTable& policy, const Environment& env,
                         const SampleWeights& weights, const HardnessTable* frozen) {
  if (policy.shape() != env.shape()) throw InconsistentPolicy("policy shape does not match environment");
  if (weights.use_hardness && !frozen) {
    throw InvalidArgument("confidence-weighted exact gradient needs a hardness table");
  }
  GradTable grad(policy.shape());
  const NodeTable probs = node_probabilities(policy);
  const double inv_p = 1.0 / static_cast<double>(env.num_prompts());
  for (PromptId x = 0; x < env.num_prompts(); ++x) {
    enumerate_sequences<double>(policy, x, [&](const EnumeratedSequence<double>& s) {
      double coef = 0.0;
      if (env.is_correct(x, s.index)) {
        coef = -weights.positive;
      } else {
        coef = weights.negative * (weights.use_hardness ? (*frozen)[x].at(s.index) : 1.0);
      }
      if (coef == 0.0) return;
      // d pi(y) / dz_{n_t, v} = pi(y) (1[v = y_t] - pi_{n_t}(v))
      const double scale = coef * s.prob * inv_p;
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        auto row = grad.row(x, s.nodes[t]);
        const auto p = probs.row(x, s.nodes[t]);
        for (std::size_t v = 0; v < row.size(); ++v) {
          row[v] += scale * ((v == s.tokens[t] ? 1.0 : 0.0) - p[v]);
        }
      }
    });
  }
  return grad;
}

GradTable exact_gradient(const PolicyTable& policy, const Environment& env, const ObjectiveSpec& spec,
                         double t, std::optional<double> p_correct, const HardnessTable* frozen) {
  spec.validate();
  const SampleWeights w = resolve_weights(spec, t, p_correct);
  if (w.use_hardness && !frozen) {
    const HardnessTable table = exact_hardness_table(policy, env, *spec.confidence);
    return exact_gradient(policy, env, w, &table);
  }
  return exact_gradient(policy, env, w, frozen);
}

double rollout_gradient_norm(const Rollout& rollout, const PolicyTable& policy,
                             const SampleWeights& weights) {
  const double coef = rollout_coefficient(weights, rollout);
  if (coef == 0.0) return 0.0;
  std::vector<double> probs(policy.vocab_size());
  double sq = 0.0;
  std::size_t node = 0;
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    softmax_into<double>(policy.row(rollout.prompt, node), probs);
    const TokenId y = rollout.tokens[t];
    const double py = probs[y];
    for (std::size_t v = 0; v < probs.size(); ++v) {
      const double g = py * ((v == y ? 1.0 : 0.0) - probs[v]);
      sq += g * g;
    }
    if (t + 1 < rollout.tokens.size()) node = policy.child(node, y);
  }
  return coef / static_cast<double>(policy.seq_len()) * std::sqrt(sq);
}

std::vector<Probe> visited_probes(std::span<const Rollout> batch, const PolicyTable& policy, Rng& rng,
                                  std::size_t count) {
  if (batch.empty()) throw InvalidArgument("no rollouts to probe");
  std::vector<Probe> probes;
  probes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = batch[rng.below(batch.size())];
    const std::size_t depth = rng.below(r.tokens.size());
    const std::size_t node = policy.node_id(std::span<const TokenId>(r.tokens.data(), depth));
    probes.push_back({r.prompt, node, static_cast<TokenId>(rng.below(policy.vocab_size()))});
  }
  return probes;
}

std::vector<Probe> random_probes(const PolicyShape& shape, Rng& rng, std::size_t count) {
  std::vector<Probe> probes;
  probes.reserve(count);
  const std::size_t nodes = shape.nodes_per_prompt();
  for (std::size_t i = 0; i < count; ++i) {
    probes.push_back({rng.below(shape.num_prompts), rng.below(nodes),
                      static_cast<TokenId>(rng.below(shape.vocab_size))});
  }
  return probes;
}

FdReport finite_difference_check(const LossFunctional& loss, const PolicyTable& policy,
                                 const GradTable& analytic, std::span<const Probe> probes, double h) {
  if (analytic.shape() != policy.shape()) throw InconsistentPolicy("gradient table shape mismatch");
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  FdReport report;
  PolicyTable work = policy;
  for (const Probe& probe : probes) {
    double& z = work.row(probe.prompt, probe.node)[probe.token];
    const double z0 = z;
    z = z0 + h;
    const FdReal plus = loss(work);
    z = z0 - h;
    const FdReal minus = loss(work);
    z = z0;
    if (!boost::multiprecision::isfinite(plus) || !boost::multiprecision::isfinite(minus)) {
      throw NumericalError("loss is not finite at a perturbed point");
    }
    // Divide by the step actually taken after rounding z0 +- h.
    const FdReal step = FdReal(z0 + h) - FdReal(z0 - h);
    const double numeric = static_cast<double>((plus - minus) / step);
    const double a = analytic.row(probe.prompt, probe.node)[probe.token];
    const double denom = std::max({std::abs(a), std::abs(numeric), kFdAbsoluteFloor});
    const double rel = std::abs(a - numeric) / denom;
    if (report.probes == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = probe;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.probes;
  }
  return report;
}

void apply_update_in_place(PolicyTable& policy, const GradTable& grad, double lr) {
  if (grad.shape() != policy.shape()) throw InconsistentPolicy("gradient table shape mismatch");
  if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
  auto z = policy.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] -= lr * g[i];
}

PolicyTable apply_update(PolicyTable policy, const GradTable& grad, double lr) {
  apply_update_in_place(policy, grad, lr);
  return policy;
}

EntropyProbe entropy_rate_probe(const PolicyTable& policy, const Rollout& rollout, double beta,
                                double lr) {
  if (rollout.reward != Reward::Incorrect) {
    throw InvalidArgument("entropy probe needs an incorrect rollout");
  }
  SampleWeights w;
  w.positive = 0.0;
  w.negative = beta;
  const Rollout one[] = {rollout};
  const GradTable grad = batch_gradient(one, policy, w);
  const PolicyTable after = apply_update(policy, grad, lr);
  EntropyProbe probe;
  std::vector<double> before_p(policy.vocab_size()), after_p(policy.vocab_size());
  std::size_t node = 0;
  for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
    softmax_into<double>(policy.row(rollout.prompt, node), before_p);
    softmax_into<double>(after.row(rollout.prompt, node), after_p);
    const double delta = step_entropy(after_p) - step_entropy(before_p);
    probe.delta_per_node.push_back(delta);
    probe.total += delta;
    if (t + 1 < rollout.tokens.size()) node = policy.child(node, rollout.tokens[t]);
  }
  return probe;
}

}  // namespace nsrlab
