#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nsrlab {

enum class ScheduleKind {
  ExponentialLinear,   // beta decays exponentially, lambda rises linearly
  Cosine,              // beta follows half a cosine, lambda rises linearly
  PerformanceDriven,   // beta tracks the batch error rate, lambda fixed
  Constant,
};

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Parameters of the time-dependent PSR weight lambda(t) and NSR weight beta(t).
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::ExponentialLinear;
  double beta_max = 1.5;
  double beta_min = 0.5;
  double kappa = 0.03;  // per optimizer step
  double lambda_min = 0.05;
  double lambda_max = 0.2;
  std::int64_t total_steps = 2000;
  double constant_lambda = 0.1;
  double constant_beta = 1.0;
  /// lambda used alongside the performance-driven beta.
  double fixed_lambda = 0.1;

  void validate() const;
};

struct WeightPair {
  double lambda_t = 0.0;
  double beta_t = 0.0;
};

/// Collects non-fatal warnings (currently: steps clamped to the horizon).
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

double beta_exponential(double t, const ScheduleSpec& spec);

/// Steps past total_steps are clamped to total_steps and reported to `diag`.
double lambda_linear(double t, const ScheduleSpec& spec, Diagnostics* diag = nullptr);
double beta_cosine(double t, const ScheduleSpec& spec, Diagnostics* diag = nullptr);
double cosine_derivative(double t, const ScheduleSpec& spec);
double beta_adaptive(double p_correct, const ScheduleSpec& spec);

/// lambda(t) and beta(t) for the spec's kind. The performance-driven kind
/// needs the current batch's correct ratio.
WeightPair schedule_weights(double t, const ScheduleSpec& spec,
                            std::optional<double> p_correct = std::nullopt,
                            Diagnostics* diag = nullptr);

/// rho(t) = beta(t) / lambda(t).
double effective_ratio(double t, const ScheduleSpec& spec,
                       std::optional<double> p_correct = std::nullopt,
                       Diagnostics* diag = nullptr);

}  // namespace nsrlab
