#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsrlab/errors.hpp"
#include "nsrlab/rng.hpp"

namespace nsrlab {

using TokenId = std::uint32_t;
using PromptId = std::size_t;
using Sequence = std::vector<TokenId>;

/// Upper bound on V^T so that exact enumeration of a prompt's response tree
/// stays cheap.
inline constexpr std::size_t kMaxSequencesPerPrompt = 65536;

struct PolicyShape {
  std::size_t vocab_size = 0;
  std::size_t seq_len = 0;
  std::size_t num_prompts = 0;

  void validate() const;

  /// V^T.
  std::size_t sequences_per_prompt() const;
  /// Number of prefix nodes of length 0..T-1, i.e. (V^T - 1) / (V - 1).
  std::size_t nodes_per_prompt() const;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

/// One real vector of length V per (prompt, prefix) node of a complete V-ary
/// tree of depth T. Nodes are numbered in level order: the root is 0 and the
/// child of node n reached by token v is n * V + 1 + v.
class NodeTable {
 public:
  NodeTable() = default;
  explicit NodeTable(const PolicyShape& shape, double fill = 0.0);

  const PolicyShape& shape() const noexcept { return shape_; }
  std::size_t vocab_size() const noexcept { return shape_.vocab_size; }
  std::size_t seq_len() const noexcept { return shape_.seq_len; }
  std::size_t num_prompts() const noexcept { return shape_.num_prompts; }
  std::size_t nodes_per_prompt() const noexcept { return nodes_per_prompt_; }

  std::size_t child(std::size_t node, TokenId token) const noexcept {
    return node * shape_.vocab_size + 1 + token;
  }
  std::size_t depth(std::size_t node) const;

  /// Node reached by following `prefix` from the root. Throws
  /// InconsistentPolicy when the prefix is too long or uses an unknown token.
  std::size_t node_id(std::span<const TokenId> prefix) const;
  Sequence prefix_of(std::size_t node) const;

  std::span<double> row(PromptId prompt, std::size_t node);
  std::span<const double> row(PromptId prompt, std::size_t node) const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  void check_prompt(PromptId prompt) const;

 protected:
  PolicyShape shape_{};
  std::size_t nodes_per_prompt_ = 0;
  std::vector<double> values_;
};

/// Tabular autoregressive softmax policy: one logit vector per prefix node.
class PolicyTable : public NodeTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(const PolicyShape& shape) : NodeTable(shape, 0.0) {}

  /// All-zero logits: the uniform policy.
  static PolicyTable uniform(const PolicyShape& shape);
  /// Logits drawn i.i.d. from N(0, scale^2).
  static PolicyTable random(const PolicyShape& shape, Rng& rng, double scale = 1.0);

  /// Throws InvalidArgument if any logit is not finite.
  void check_finite() const;
};

/// Gradient of a scalar loss with respect to every logit of a PolicyTable.
class GradTable : public NodeTable {
 public:
  GradTable() = default;
  explicit GradTable(const PolicyShape& shape) : NodeTable(shape, 0.0) {}

  double squared_norm() const;
  double max_abs() const;
};

/// Probability vector over the vocabulary.
class Distribution {
 public:
  Distribution() = default;
  /// Validates entries in [0, 1] summing to one within 1e-12.
  explicit Distribution(std::vector<double> probs);

  static Distribution trusted(std::vector<double> probs) {
    Distribution d;
    d.probs_ = std::move(probs);
    return d;
  }

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

/// Max-shifted softmax of `logits / temperature` written into `out`.
template <class Real>
void softmax_into(std::span<const double> logits, std::span<Real> out, double temperature = 1.0) {
  double max_logit = logits[0];
  for (double z : logits) max_logit = z > max_logit ? z : max_logit;
  using std::exp;
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = exp((static_cast<Real>(logits[i]) - static_cast<Real>(max_logit)) / static_cast<Real>(temperature));
    total += out[i];
  }
  for (auto& p : out) p /= total;
}

Distribution softmax(std::span<const double> logits);

Distribution node_distribution(const PolicyTable& policy, PromptId prompt, std::size_t node);

struct SequenceProb {
  double total = 0.0;
  std::vector<double> per_token;
};

/// Probability of `seq` under the policy; accumulated in log space.
SequenceProb sequence_prob(const PolicyTable& policy, PromptId prompt, std::span<const TokenId> seq);

struct SampledSequence {
  Sequence tokens;
  std::vector<double> per_token;
};

/// Ancestral sampling of one response. `temperature` divides the logits.
SampledSequence sample_sequence(const PolicyTable& policy, PromptId prompt, Rng& rng,
                                double temperature = 1.0);

/// Shannon entropy in nats; zero-probability entries contribute nothing.
double step_entropy(const Distribution& dist);
double step_entropy(std::span<const double> probs);

/// Softmax of every node, in the same layout as the policy.
NodeTable node_probabilities(const PolicyTable& policy);

/// Visitation-weighted mean per-step entropy, averaged over prompts:
/// E_x E_y[(1/T) sum_t H(pi(.|x, y_<t))], computed exactly over the tree.
double mean_policy_entropy(const PolicyTable& policy);

// Snapshot serialization. Keys are "prompt/prefix" with the prefix written as
// dash-joined token ids ("3/" is the root of prompt 3, "3/0-2" a depth-2 node).
nlohmann::json policy_to_json(const PolicyTable& policy);
PolicyTable policy_from_json(const nlohmann::json& doc);
void save_policy(const PolicyTable& policy, const std::filesystem::path& path);
PolicyTable load_policy(const std::filesystem::path& path);

std::string node_key(PromptId prompt, std::span<const TokenId> prefix);

}  // namespace nsrlab
