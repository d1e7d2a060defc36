#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nsrlab/eval.hpp"
#include "nsrlab/trainer.hpp"

namespace nsrlab {

/// Everything one experiment needs. JSON sections: env, objective, schedule,
/// confidence, training, eval, plus run_name, description and output_dir.
/// The schedule and confidence sections are optional; when present they are
/// attached to the objective.
struct ExperimentConfig {
  std::string run_name;
  std::string description;
  std::string output_dir;
  TrainConfig training;
  EvalOptions eval;

  /// Cross-section checks. Throws ConfigError naming the field.
  void validate() const;
};

/// Parses and validates. `base_dir` resolves relative paths such as
/// env.membership_file. Unknown keys and wrong types are ConfigErrors.
ExperimentConfig config_from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved form with every default written out; parses back to an
/// equivalent config.
nlohmann::json config_to_json(const ExperimentConfig& config);

bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace nsrlab
