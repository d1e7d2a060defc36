#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nsrlab/objectives.hpp"
#include "nsrlab/policy.hpp"

namespace nsrlab {

// Token-level descent directions, -dL/dz_v, for a single sampled token.

/// Correct sample: pi_y (1 - pi_y) at the sampled token, -pi_y pi_v elsewhere.
std::vector<double> psr_token_grad(const Distribution& dist, TokenId sampled);
/// Incorrect sample: the exact negation of psr_token_grad.
std::vector<double> nsr_token_grad(const Distribution& dist, TokenId sampled);
/// Incorrect sample with hardness weight w: w * nsr_token_grad.
std::vector<double> cwnsr_token_grad(const Distribution& dist, TokenId sampled, double w);

/// Gradient of mc_loss with respect to every logit. Rollouts are accumulated
/// in batch order, tokens in sequence order.
GradTable batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                         const ObjectiveSpec& spec, double t,
                         std::optional<double> p_correct = std::nullopt);
GradTable batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                         const SampleWeights& weights);

/// Gradient of clipped_mc_loss. Tokens whose clipped branch is selected
/// contribute nothing.
GradTable clipped_batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                                 const ObjectiveSpec& spec, double t,
                                 std::optional<double> p_correct = std::nullopt);
GradTable clipped_batch_gradient(std::span<const Rollout> batch, const PolicyTable& policy,
                                 const SampleWeights& weights, double clip_epsilon);

/// Gradient of the exact (enumerated) weighted loss. Hardness weights are
/// treated as constants, taken from `frozen` or computed once from `policy`.
GradTable exact_gradient(const PolicyTable& policy, const Environment& env, const ObjectiveSpec& spec,
                         double t, std::optional<double> p_correct = std::nullopt,
                         const HardnessTable* frozen = nullptr);
GradTable exact_gradient(const PolicyTable& policy, const Environment& env,
                         const SampleWeights& weights, const HardnessTable* frozen);

/// L2 norm of a single rollout's contribution to the gradient (batch of one).
double rollout_gradient_norm(const Rollout& rollout, const PolicyTable& policy,
                             const SampleWeights& weights);

struct Probe {
  PromptId prompt = 0;
  std::size_t node = 0;
  TokenId token = 0;
};

/// `count` probes drawn from the nodes the batch visits.
std::vector<Probe> visited_probes(std::span<const Rollout> batch, const PolicyTable& policy, Rng& rng,
                                  std::size_t count);
/// `count` probes drawn uniformly over all logits.
std::vector<Probe> random_probes(const PolicyShape& shape, Rng& rng, std::size_t count);

// Losses for the finite-difference oracle are evaluated in 113-bit binary
// floating point so that round-off in L(z + h) - L(z - h) stays far below the
// absolute floor.
using FdReal = boost::multiprecision::cpp_bin_float_quad;
using LossFunctional = std::function<FdReal(const PolicyTable&)>;

struct FdReport {
  double max_rel_error = 0.0;
  Probe worst{};
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

/// Compares `analytic` against central differences (L(z + h) - L(z - h)) / 2h
/// at each probe. Relative error is |a - n| / max(|a|, |n|, 1e-10).
/// Throws NumericalError if the loss is not finite at a perturbed point.
FdReport finite_difference_check(const LossFunctional& loss, const PolicyTable& policy,
                                 const GradTable& analytic, std::span<const Probe> probes,
                                 double h = 1e-5);

inline constexpr double kFdAbsoluteFloor = 1e-10;

/// z <- z - lr * g.
PolicyTable apply_update(PolicyTable policy, const GradTable& grad, double lr);
void apply_update_in_place(PolicyTable& policy, const GradTable& grad, double lr);

struct EntropyProbe {
  std::vector<double> delta_per_node;  // H_after - H_before at each visited node
  double total = 0.0;
};

/// Entropy change at each node an incorrect rollout visits after one
/// beta-scaled NSR descent step of size lr.
EntropyProbe entropy_rate_probe(const PolicyTable& policy, const Rollout& rollout, double beta,
                                double lr);

}  // namespace nsrlab
