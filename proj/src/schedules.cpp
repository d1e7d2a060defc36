#include "nsrlab/schedules.hpp"

#include <cmath>
#include <numbers>

#include "nsrlab/errors.hpp"

namespace nsrlab {

namespace {

void check_step(double t) {
  if (!(t >= 0.0)) throw InvalidArgument("schedule step must be non-negative");
}

double clamp_to_horizon(double t, const ScheduleSpec& spec, Diagnostics* diag) {
  check_step(t);
  const auto horizon = static_cast<double>(spec.total_steps);
  if (t > horizon) {
    if (diag) {
      diag->warn("step " + std::to_string(t) + " past total_steps " +
                 std::to_string(spec.total_steps) + "; clamped");
    }
    return horizon;
  }
  return t;
}

}  // namespace

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::ExponentialLinear: return "exponential-linear";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::PerformanceDriven: return "performance-driven";
    case ScheduleKind::Constant: return "constant";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "exponential-linear") return ScheduleKind::ExponentialLinear;
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "performance-driven") return ScheduleKind::PerformanceDriven;
  if (name == "constant") return ScheduleKind::Constant;
  throw InvalidArgument("unknown schedule kind \"" + std::string(name) + "\"");
}

void ScheduleSpec::validate() const {
  if (!(beta_min > 0.0)) throw InvalidArgument("beta_min must be positive");
  if (!(beta_max >= beta_min)) throw InvalidArgument("beta_max must be >= beta_min");
  if (!(lambda_min > 0.0)) throw InvalidArgument("lambda_min must be positive");
  if (!(lambda_max >= lambda_min)) throw InvalidArgument("lambda_max must be >= lambda_min");
  if (!(kappa > 0.0)) throw InvalidArgument("kappa must be positive");
  if (total_steps < 1) throw InvalidArgument("total_steps must be at least 1");
  if (!(constant_lambda > 0.0) || !(constant_beta > 0.0)) {
    throw InvalidArgument("constant schedule weights must be positive");
  }
  if (!(fixed_lambda > 0.0)) throw InvalidArgument("fixed_lambda must be positive");
}

double beta_exponential(double t, const ScheduleSpec& spec) {
  check_step(t);
  return spec.beta_min + (spec.beta_max - spec.beta_min) * std::exp(-spec.kappa * t);
}

double lambda_linear(double t, const ScheduleSpec& spec, Diagnostics* diag) {
  t = clamp_to_horizon(t, spec, diag);
  return spec.lambda_min +
         (spec.lambda_max - spec.lambda_min) * t / static_cast<double>(spec.total_steps);
}

double beta_cosine(double t, const ScheduleSpec& spec, Diagnostics* diag) {
  t = clamp_to_horizon(t, spec, diag);
  const double phase = std::numbers::pi * t / static_cast<double>(spec.total_steps);
  return spec.beta_min + 0.5 * (spec.beta_max - spec.beta_min) * (1.0 + std::cos(phase));
}

double cosine_derivative(double t, const ScheduleSpec& spec) {
  check_step(t);
  const auto horizon = static_cast<double>(spec.total_steps);
  if (t > horizon) return 0.0;  // flat past the clamp
  return -(std::numbers::pi / (2.0 * horizon)) * (spec.beta_max - spec.beta_min) *
         std::sin(std::numbers::pi * t / horizon);
}

double beta_adaptive(double p_correct, const ScheduleSpec& spec) {
  if (!(p_correct >= 0.0 && p_correct <= 1.0)) {
    throw InvalidArgument("p_correct must lie in [0, 1]");
  }
  return spec.beta_min + (spec.beta_max - spec.beta_min) * (1.0 - p_correct);
}

WeightPair schedule_weights(double t, const ScheduleSpec& spec, std::optional<double> p_correct,
                            Diagnostics* diag) {
  switch (spec.kind) {
    case ScheduleKind::ExponentialLinear:
      return {lambda_linear(t, spec, diag), beta_exponential(t, spec)};
    case ScheduleKind::Cosine:
      return {lambda_linear(t, spec, diag), beta_cosine(t, spec, nullptr)};
    case ScheduleKind::PerformanceDriven:
      if (!p_correct) {
        throw InvalidArgument("performance-driven schedule needs the batch correct ratio");
      }
      check_step(t);
      return {spec.fixed_lambda, beta_adaptive(*p_correct, spec)};
    case ScheduleKind::Constant:
      check_step(t);
      return {spec.constant_lambda, spec.constant_beta};
  }
  throw InvalidArgument("unknown schedule kind");
}

double effective_ratio(double t, const ScheduleSpec& spec, std::optional<double> p_correct,
                       Diagnostics* diag) {
  const WeightPair w = schedule_weights(t, spec, p_correct, diag);
  return w.beta_t / w.lambda_t;
}

}  // namespace nsrlab
