#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsrlab/environment.hpp"

namespace nsrlab {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t configs_per_case = 12;
  std::size_t probes_per_config = 24;
  double tolerance = 1e-6;
  double step = 1e-5;
  /// Fixed environment to check on; when absent each configuration draws a
  /// small random one (V in [2, 5], T in [1, 3], 1 to 3 prompts).
  std::optional<EnvSpec> env;
};

struct GradcheckRow {
  std::string label;
  bool sampled = true;  // false for the exact (enumerated) objectives
  std::size_t configs = 0;
  std::size_t probes = 0;
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;  // entries at the worst probe
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double tolerance = 0.0;

  bool passed() const;
  /// Number of configurations over the sampled-batch cases.
  std::size_t sampled_configs() const;
  double max_rel_error(bool sampled_only = false) const;
};

/// Runs analytic-vs-central-difference checks over every objective family:
/// batch gradients for each family and schedule, the clipped surrogate at
/// the behavior policy, and the exact enumerated objectives.
GradcheckReport run_gradcheck_suite(const GradcheckOptions& options);

std::string format_gradcheck_table(const GradcheckReport& report);

}  // namespace nsrlab
