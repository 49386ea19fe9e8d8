#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "segctc/config.hpp"
#include "segctc/data.hpp"
#include "segctc/joint.hpp"
#include "segctc/selfcheck.hpp"

namespace segctc::cli {

// Each command returns the process exit status. Errors propagate as
// segctc::Error; main() turns them into a message and status 1.

struct TrainArgs {
  std::filesystem::path config;
  std::vector<std::string> overrides;  // "section.key=value"
  std::optional<std::filesystem::path> resume;
  bool quiet = false;
};

/// Files written into train.out_dir.
inline constexpr const char* kFinalCheckpoint = "model.ckpt";
inline constexpr const char* kConvergenceCsv = "convergence.csv";
std::string epoch_checkpoint_name(int epoch);  // "epoch-007.ckpt"

int cmd_train(const TrainArgs& args, std::ostream& out);

struct DecodeArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path features;
  std::optional<std::filesystem::path> vocab;
  DecodeMode mode = DecodeMode::kScrf;
  std::filesystem::path out;
};

int cmd_decode(const DecodeArgs& args, std::ostream& out);

struct ScoreArgs {
  std::filesystem::path ref;
  std::filesystem::path hyp;
  std::optional<std::filesystem::path> mapping;
  bool per_utterance = true;
};

int cmd_score(const ScoreArgs& args, std::ostream& out);

struct GenerateArgs {
  std::filesystem::path out_dir;
  SynthConfig synth;
  std::size_t train_utterances = 500;
  std::size_t valid_utterances = 100;
};

/// Writes vocab.txt, {train,valid}.feats, {train,valid}.labels and a
/// starter train.ini.
int cmd_generate(const GenerateArgs& args, std::ostream& out);

int cmd_selfcheck(const SelfCheckOptions& options, std::ostream& out);

}  // namespace segctc::cli
