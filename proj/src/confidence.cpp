#include "nsrlab/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "nsrlab/errors.hpp"

namespace nsrlab {

void ConfidenceParams::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("confidence alpha must be positive");
  if (!(epsilon_floor > 0.0 && epsilon_floor <= 1.0)) {
    throw InvalidArgument("confidence epsilon_floor must lie in (0, 1]");
  }
}

double confidence(std::span<const double> per_token_probs) {
  if (per_token_probs.empty()) throw InvalidArgument("confidence of an empty sequence");
  double log_sum = 0.0;
  for (double p : per_token_probs) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("token probability outside (0, 1]");
    log_sum += std::log(p);
  }
  return std::exp(log_sum / static_cast<double>(per_token_probs.size()));
}

double hardness(double conf, const ConfidenceParams& params) {
  if (!(conf > 0.0 && conf <= 1.0)) throw InvalidArgument("confidence outside (0, 1]");
  return std::max(params.epsilon_floor, std::pow(conf, params.alpha));
}

}  // namespace nsrlab
