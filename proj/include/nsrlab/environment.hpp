#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "nsrlab/policy.hpp"

namespace nsrlab {

enum class VerifierRule { ModSum, MembershipList };

std::string_view to_string(VerifierRule rule);
VerifierRule parse_verifier_rule(std::string_view name);

enum class Reward : int { Incorrect = -1, Correct = +1 };

inline double reward_value(Reward r) { return static_cast<double>(static_cast<int>(r)); }

/// Synthetic task description: vocabulary, response length, prompts, and the
/// rule deciding which responses are correct.
struct EnvSpec {
  std::size_t vocab_size = 6;
  std::size_t seq_len = 3;
  std::size_t num_prompts = 8;
  VerifierRule rule = VerifierRule::ModSum;
  /// mod-sum: target residue per prompt. Empty means prompt p targets p mod V.
  std::vector<TokenId> targets;
  /// membership-list: the correct responses of each prompt.
  std::vector<std::vector<Sequence>> correct_lists;

  PolicyShape shape() const { return {vocab_size, seq_len, num_prompts}; }
  void validate() const;
};

/// A validated environment with the verifier precomputed over every response.
class Environment {
 public:
  explicit Environment(EnvSpec spec);

  const EnvSpec& spec() const noexcept { return spec_; }
  PolicyShape shape() const { return spec_.shape(); }
  std::size_t num_prompts() const noexcept { return spec_.num_prompts; }
  std::size_t seq_len() const noexcept { return spec_.seq_len; }
  std::size_t vocab_size() const noexcept { return spec_.vocab_size; }
  std::size_t num_sequences() const noexcept { return num_sequences_; }

  /// Throws InvalidArgument for an unknown prompt or a malformed sequence.
  Reward verify(PromptId prompt, std::span<const TokenId> seq) const;

  /// Verifier lookup by sequence index (tokens read as base-V digits, first
  /// token most significant).
  bool is_correct(PromptId prompt, std::size_t seq_index) const {
    return correct_[prompt * num_sequences_ + seq_index] != 0;
  }

  std::size_t sequence_index(std::span<const TokenId> seq) const;
  Sequence sequence_at(std::size_t index) const;
  std::size_t correct_count(PromptId prompt) const;

 private:
  void check(PromptId prompt, std::span<const TokenId> seq) const;

  EnvSpec spec_;
  std::size_t num_sequences_ = 0;
  std::vector<unsigned char> correct_;
};

template <class Real>
struct EnumeratedSequence {
  std::size_t index = 0;
  std::span<const TokenId> tokens;
  std::span<const std::size_t> nodes;  // node visited at each step
  std::span<const Real> token_probs;
  Real prob = 0;
};

/// Visits every response of `prompt` in index order together with its
/// per-token probabilities and total probability, evaluated in `Real`.
template <class Real, class Visitor>
void enumerate_sequences(const PolicyTable& policy, PromptId prompt, Visitor&& visit) {
  policy.check_prompt(prompt);
  const std::size_t V = policy.vocab_size();
  const std::size_t T = policy.seq_len();
  const std::size_t N = policy.nodes_per_prompt();
  std::vector<Real> probs(N * V);
  for (std::size_t n = 0; n < N; ++n) {
    softmax_into<Real>(policy.row(prompt, n), std::span<Real>(probs.data() + n * V, V));
  }
  const std::size_t count = policy.shape().sequences_per_prompt();
  Sequence tokens(T, 0);
  std::vector<std::size_t> nodes(T, 0);
  std::vector<Real> token_probs(T);
  std::vector<Real> prefix_prob(T + 1, Real(1));
  // Odometer over base-V digits; only the suffix after the lowest changed
  // digit is recomputed.
  std::size_t dirty = 0;
  for (std::size_t index = 0; index < count; ++index) {
    for (std::size_t t = dirty; t < T; ++t) {
      nodes[t] = t == 0 ? 0 : policy.child(nodes[t - 1], tokens[t - 1]);
      token_probs[t] = probs[nodes[t] * V + tokens[t]];
      prefix_prob[t + 1] = prefix_prob[t] * token_probs[t];
    }
    EnumeratedSequence<Real> item;
    item.index = index;
    item.tokens = tokens;
    item.nodes = nodes;
    item.token_probs = token_probs;
    item.prob = prefix_prob[T];
    visit(item);
    std::size_t t = T;
    while (t-- > 0) {
      if (++tokens[t] < V) break;
      tokens[t] = 0;
    }
    dirty = t < T ? t : 0;
  }
}

double correct_mass(const Environment& env, PromptId prompt, const PolicyTable& policy);
double incorrect_mass(const Environment& env, PromptId prompt, const PolicyTable& policy);

/// Membership lists from a JSON sidecar: an array (one entry per prompt) of
/// arrays of integer token arrays.
std::vector<std::vector<Sequence>> load_membership_file(const std::filesystem::path& path);

}  // namespace nsrlab
