#pragma once

#include <json.hpp>

#include "freqgan/trainer.hpp"

namespace freqgan {

/// Malformed config file: syntax errors (with line/column from the parser)
/// or unknown/badly-typed fields.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict config (de)serialization: unknown keys are rejected so typos fail
/// loudly, and every field has the documented default.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

std::string to_string(Regularizer r);
Regularizer regularizer_from_string(const std::string& s);
std::string to_string(MatchTransform t);
MatchTransform match_transform_from_string(const std::string& s);
std::string to_string(MatchDistance d);
MatchDistance match_distance_from_string(const std::string& s);

}  // namespace freqgan
