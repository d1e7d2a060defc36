#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsrlab/environment.hpp"
#include "nsrlab/policy.hpp"

namespace nsrlab {

/// Unbiased Pass@k: 1 - C(n - c, k) / C(n, k), via a running product.
/// Requires 1 <= k <= n and 0 <= c <= n; throws InvalidArgument otherwise.
double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k);

/// Reference value by counting every k-subset of a pool of n items, c of
/// them correct. Throws OutOfRange for n > 12.
double pass_at_k_oracle(std::int64_t n, std::int64_t c, std::int64_t k);

std::vector<std::int64_t> default_k_grid();

struct EvalOptions {
  std::int64_t samples = 256;
  std::vector<std::int64_t> k_grid = default_k_grid();
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Also report quantities computed by enumerating every response.
  bool exact = true;
  std::size_t threads = 1;
};

struct PromptEval {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::size_t distinct_correct = 0;
  std::vector<double> pass_at_k;  // aligned with EvalReport::k_grid
};

struct EvalReport {
  std::vector<std::int64_t> k_grid;
  std::vector<PromptEval> prompts;
  /// Mean over prompts.
  std::vector<double> pass_at_k;
  /// Mean over prompts of the response-level entropy in nats: exact when
  /// enumeration is enabled, otherwise the sample mean of -log pi(y).
  double sequence_entropy = 0.0;
  std::size_t distinct_correct = 0;
  std::optional<double> exact_correct_mass;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

EvalReport evaluate_policy(const PolicyTable& policy, const Environment& env, const EvalOptions& options);

}  // namespace nsrlab
