#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "segctc/data.hpp"
#include "segctc/eval.hpp"
#include "segctc/model.hpp"

namespace segctc {

enum class DecodeMode { kScrf, kCtc };

DecodeMode parse_decode_mode(std::string_view name);
std::string_view decode_mode_name(DecodeMode mode);

struct TrainConfig {
  double lambda = 0.5;     // weight of the CTC loss
  double lr_init = 0.1;
  double lr_decay = 0.75;
  double dropout = 0.2;
  int epochs = 20;         // total, pretraining epochs included
  int pretrain_epochs = 0;  // CTC-only epochs at the start
  std::uint64_t seed = 1;
  std::size_t batch_size = 1;
  double clip_norm = 5.0;  // <= 0 disables clipping
  /// Decoder used for the logged validation PER. Unset means CTC when
  /// lambda == 1 and SCRF otherwise.
  std::optional<DecodeMode> valid_mode;

  /// Throws Error describing the first invalid field.
  void validate() const;
  DecodeMode resolved_valid_mode() const;

  bool operator==(const TrainConfig&) const = default;
};

struct JointLoss {
  double loss = 0.0;
  double ctc_loss = 0.0;
  double scrf_loss = 0.0;
  ModelParams grad;  // empty unless gradients were requested
};

/// lambda * CTC + (1 - lambda) * SCRF over a single encoder pass. Heads
/// with zero weight are evaluated but not backpropagated.
JointLoss joint_loss(const Matrix& features, std::span<const int> labels, const ModelParams& params,
                     double lambda, std::size_t max_seg_len, const EncodeOptions& options = {},
                     bool with_gradients = true);

/// Vocabulary-id hypothesis for one utterance.
LabelSequence decode(const Matrix& features, const ModelParams& params, std::size_t max_seg_len,
                     DecodeMode mode);

/// Corpus PER of `mode` hypotheses against the dataset labels.
double dataset_per(const Dataset& data, const ModelParams& params, std::size_t max_seg_len,
                   DecodeMode mode, const Vocabulary& vocab, const PhoneMapping& mapping);

struct EpochStats {
  double loss_total = 0.0;  // means over utterances
  double loss_ctc = 0.0;
  double loss_scrf = 0.0;
  std::size_t updates = 0;
  std::size_t clipped_updates = 0;
};

/// One pass of plain SGD over `data` in an order shuffled from (seed, epoch).
/// Gradients are averaged over each batch and clipped by global norm.
EpochStats sgd_epoch(const Dataset& data, ModelParams& params, double lr, double lambda,
                     std::size_t max_seg_len, const TrainConfig& config, int epoch);

/// Returns decay * lr when the newest validation error is not strictly
/// below the previous one, otherwise lr.
double lr_schedule(std::span<const double> errors, double lr, double decay = 0.75);

/// Resumable training state; everything a checkpoint stores.
struct TrainState {
  ModelParams params;
  int epochs_done = 0;
  int decay_count = 0;  // decays in the current phase
  std::optional<double> previous_error;
  ConvergenceLog log;

  double learning_rate(const TrainConfig& config) const;
};

TrainState initial_state(const ModelConfig& model, const TrainConfig& config);

struct TrainContext {
  const Dataset& train;
  const Dataset& valid;
  const Vocabulary& vocab;
  const PhoneMapping& mapping;
  std::function<void(const TrainState&, const EpochStats&)> on_epoch;
};

/// Runs epochs state.epochs_done + 1 .. config.epochs. The first
/// pretrain_epochs use lambda = 1; the learning rate and its schedule
/// restart when joint training begins.
void train(TrainState& state, const ModelConfig& model, const TrainConfig& config,
           const TrainContext& context);

/// Throws Error naming the first utterance whose labels no segmentation or
/// CTC path can produce after subsampling.
void check_alignable(const Dataset& data, const ModelConfig& model);

}  // namespace segctc
