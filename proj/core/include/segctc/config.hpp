#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segctc/joint.hpp"
#include "segctc/model.hpp"

namespace segctc {

struct DataPaths {
  std::filesystem::path train_features;
  std::filesystem::path train_labels;
  std::filesystem::path valid_features;
  std::filesystem::path valid_labels;
  std::filesystem::path vocab;
  std::optional<std::filesystem::path> mapping;
};

/// Everything `segctc train` reads from its config file. model.input_dim and
/// model.vocab_size are filled in from the data, not the file.
struct RunConfig {
  DataPaths data;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path out_dir;
};

using ConfigOverride = std::pair<std::string, std::string>;  // "section.key", value

/// Parses the `key = value` config with [data] [encoder] [scrf] [ctc]
/// [train] sections. Overrides replace file values. Relative data paths are
/// resolved against `base_dir`. Throws Error naming the offending key.
RunConfig parse_run_config(const std::string& text, const std::vector<ConfigOverride>& overrides = {},
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<ConfigOverride>& overrides = {});

/// Canonical [model] + [train] text stored in checkpoints.
std::string format_model_snapshot(const ModelConfig& model, const TrainConfig& train);
std::pair<ModelConfig, TrainConfig> parse_model_snapshot(const std::string& text);

/// Parses "section.key=value".
ConfigOverride parse_override(const std::string& spec);

}  // namespace segctc
