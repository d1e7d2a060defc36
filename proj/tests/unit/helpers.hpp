#pragma once

#include <cmath>
#include <vector>

#include "nsrlab/environment.hpp"
#include "nsrlab/policy.hpp"

namespace nsrlab::testing {

// Independent re-derivation of a token probability straight from raw
// logits, in long double, without the library's softmax.
inline long double raw_token_prob(const PolicyTable& policy, PromptId x, std::size_t node, TokenId v) {
  const auto row = policy.row(x, node);
  long double denom = 0;
  for (double z : row) denom += std::exp(static_cast<long double>(z));
  return std::exp(static_cast<long double>(row[v])) / denom;
}

inline long double raw_sequence_prob(const PolicyTable& policy, PromptId x, const Sequence& seq) {
  long double p = 1;
  std::size_t node = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    p *= raw_token_prob(policy, x, node, seq[t]);
    node = node * policy.vocab_size() + 1 + seq[t];
  }
  return p;
}

// Every sequence of length T over V tokens, first token most significant.
inline std::vector<Sequence> all_sequences(std::size_t V, std::size_t T) {
  std::vector<Sequence> out;
  Sequence s(T, 0);
  while (true) {
    out.push_back(s);
    std::size_t i = T;
    while (i > 0) {
      --i;
      if (++s[i] < V) break;
      s[i] = 0;
      if (i == 0) return out;
    }
    if (T == 0) return out;
  }
}

inline EnvSpec mod_sum_env(std::size_t V, std::size_t T, std::size_t P) {
  EnvSpec spec;
  spec.vocab_size = V;
  spec.seq_len = T;
  spec.num_prompts = P;
  return spec;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace nsrlab::testing
