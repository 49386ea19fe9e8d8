#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

using namespace segctc;

int main(int argc, char** argv) {
  CLI::App app{"segctc: segmental CRF + CTC joint acoustic model"};
  app.require_subcommand(1);

  cli::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config,-c", train.config, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--set", train.overrides, "Override a config value: section.key=value (repeatable)");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_flag("--quiet,-q", train.quiet, "No per-epoch output");

  cli::DecodeArgs dec;
  std::string dec_mode = "scrf";
  auto* decode_cmd = app.add_subcommand("decode", "Decode a feature file with a checkpoint");
  decode_cmd->add_option("--checkpoint", dec.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--features", dec.features, "Feature file")->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--vocab", dec.vocab, "Vocabulary the output must match")->check(CLI::ExistingFile);
  decode_cmd->add_option("--mode", dec_mode, "Decoder")->check(CLI::IsMember({"scrf", "ctc"}))->capture_default_str();
  decode_cmd->add_option("--out,-o", dec.out, "Hypothesis file")->required();

  cli::ScoreArgs score;
  bool summary_only = false;
  auto* score_cmd = app.add_subcommand("score", "Phone error rate of hypotheses against references");
  score_cmd->add_option("--ref", score.ref, "Reference transcripts")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--hyp", score.hyp, "Hypothesis transcripts")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--mapping", score.mapping, "Symbol mapping applied before scoring")
      ->check(CLI::ExistingFile);
  score_cmd->add_flag("--summary", summary_only, "Skip per-utterance counts");

  cli::GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset and starter config");
  gen_cmd->add_option("--out-dir,-o", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--train", gen.train_utterances, "Training utterances")->capture_default_str();
  gen_cmd->add_option("--valid", gen.valid_utterances, "Validation utterances")->capture_default_str();
  gen_cmd->add_option("--vocab-size", gen.synth.vocab_size, "Label count")->capture_default_str();
  gen_cmd->add_option("--dim", gen.synth.feature_dim, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--sigma", gen.synth.noise_sigma, "Noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--min-seg", gen.synth.min_seg_len, "Shortest segment in frames")->capture_default_str();
  gen_cmd->add_option("--max-seg", gen.synth.max_seg_len, "Longest segment in frames")->capture_default_str();
  gen_cmd->add_option("--min-labels", gen.synth.min_labels, "Fewest labels per utterance")->capture_default_str();
  gen_cmd->add_option("--max-labels", gen.synth.max_labels, "Most labels per utterance")->capture_default_str();
  gen_cmd->add_option("--task-seed", gen.synth.prototype_seed, "Seed for the label prototypes")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.synth.seed, "Seed for the samples")->capture_default_str();

  SelfCheckOptions check;
  std::string scale = "small";
  std::string fault = "none";
  auto* check_cmd = app.add_subcommand("selfcheck", "Compare dynamic programs and gradients against oracles");
  check_cmd->add_option("--scale", scale, "Instance count and size")
      ->check(CLI::IsMember({"small", "full"}))
      ->capture_default_str();
  check_cmd->add_option("--seed", check.seed, "Seed for random instances")->capture_default_str();
  check_cmd->add_option("--inject-fault", fault, "Corrupt one computation (testing the checks themselves)")
      ->check(CLI::IsMember({"none", "scrf-partition", "scrf-numerator", "ctc-forward"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cli::cmd_train(train, std::cout);
    if (*decode_cmd) {
      dec.mode = parse_decode_mode(dec_mode);
      return cli::cmd_decode(dec, std::cout);
    }
    if (*score_cmd) {
      score.per_utterance = !summary_only;
      return cli::cmd_score(score, std::cout);
    }
    if (*gen_cmd) return cli::cmd_generate(gen, std::cout);
    if (*check_cmd) {
      check.scale = parse_selfcheck_scale(scale);
      check.fault = parse_fault(fault);
      return cli::cmd_selfcheck(check, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "segctc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
