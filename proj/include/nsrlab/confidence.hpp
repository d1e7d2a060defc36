#pragma once

#include <span>

namespace nsrlab {

struct ConfidenceParams {
  double alpha = 1.0;          // sensitivity exponent
  double epsilon_floor = 0.1;  // minimum penalty weight

  void validate() const;
};

/// Geometric mean of the per-token probabilities, exp(mean(log p)).
/// Every entry must lie in (0, 1].
double confidence(std::span<const double> per_token_probs);

/// max(epsilon_floor, conf^alpha).
double hardness(double conf, const ConfidenceParams& params);

}  // namespace nsrlab
