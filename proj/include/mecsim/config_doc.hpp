#pragma once

#include <string>

#include "mecsim/harness.hpp"

namespace mecsim {

// The full experiment document: {"system": ..., "experiment": ..., "training": ...}.
// Every section and key is optional and falls back to its default.
struct FullConfig {
  SystemConfig system;
  ExperimentConfig experiment;
  TrainConfig training;
};

FullConfig full_config_from_json_text(const std::string& text);
FullConfig full_config_from_file(const std::string& path);
std::string full_config_to_json_text(const FullConfig& fc);

}  // namespace mecsim
