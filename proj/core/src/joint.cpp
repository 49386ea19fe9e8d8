#include "segctc/joint.hpp"

#include <cmath>
#include <numeric>

namespace segctc {

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "scrf") return DecodeMode::kScrf;
  if (name == "ctc") return DecodeMode::kCtc;
  throw Error("unknown decode mode '" + std::string(name) + "' (expected scrf or ctc)");
}

std::string_view decode_mode_name(DecodeMode mode) {
  return mode == DecodeMode::kScrf ? "scrf" : "ctc";
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("train.lambda must be in [0, 1]");
  if (!(lr_init >= 0.0)) throw Error("train.lr_init must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw Error("train.lr_decay must be in (0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("train.dropout must be in [0, 1)");
  if (epochs < 0) throw Error("train.epochs must be >= 0");
  if (pretrain_epochs < 0) throw Error("train.pretrain_epochs must be >= 0");
  if (batch_size == 0) throw Error("train.batch_size must be >= 1");
}

DecodeMode TrainConfig::resolved_valid_mode() const {
  if (valid_mode) return *valid_mode;
  return lambda == 1.0 ? DecodeMode::kCtc : DecodeMode::kScrf;
}

namespace {

LabelSequence to_ctc_ids(std::span<const int> labels) {
  LabelSequence out(labels.begin(), labels.end());
  for (int& y : out) y += 1;
  return out;
}

}  // namespace

JointLoss joint_loss(const Matrix& features, std::span<const int> labels, const ModelParams& params,
                     double lambda, std::size_t max_seg_len, const EncodeOptions& options,
                     bool with_gradients) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must be in [0, 1]");
  EncoderTape tape;
  const Matrix hidden = encode(features, params.encoder, options, with_gradients ? &tape : nullptr);

  const bool ctc_grad = with_gradients && lambda > 0.0;
  const bool scrf_grad = with_gradients && lambda < 1.0;
  const FramePosteriors post = ctc_posteriors(hidden, params.ctc);
  CtcLoss ctc = ctc_loss(post, to_ctc_ids(labels), ctc_grad);
  ScrfLoss scrf = scrf_loss(hidden, labels, params.scrf, max_seg_len, scrf_grad);

  JointLoss out;
  out.ctc_loss = ctc.loss;
  out.scrf_loss = scrf.loss;
  out.loss = lambda * ctc.loss + (1.0 - lambda) * scrf.loss;
  if (!with_gradients) return out;

  out.grad = zeros_like(params);
  Matrix d_hidden(hidden.rows(), hidden.cols());
  if (ctc_grad) {
    Matrix g = ctc.grad_logits;
    for (double& v : g.values()) v *= lambda;
    d_hidden.add_scaled(ctc_head_backward(hidden, params.ctc, g, out.grad.ctc), 1.0);
  }
  if (scrf_grad) {
    const double w = 1.0 - lambda;
    std::vector<TensorRef> dst, src;
    collect_tensors(out.grad.scrf, dst);
    collect_tensors(scrf.grad, src);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value->add_scaled(*src[i].value, w);
    d_hidden.add_scaled(scrf.grad_hidden, w);
  }
  encode_backward(params.encoder, tape, d_hidden, out.grad.encoder);
  return out;
}

LabelSequence decode(const Matrix& features, const ModelParams& params, std::size_t max_seg_len,
                     DecodeMode mode) {
  const Matrix hidden = encode(features, params.encoder);
  if (mode == DecodeMode::kScrf) return scrf_viterbi_decode(hidden, params.scrf, max_seg_len).labels;
  LabelSequence out = ctc_best_path_decode(ctc_posteriors(hidden, params.ctc));
  for (int& y : out) y -= 1;
  return out;
}

double dataset_per(const Dataset& data, const ModelParams& params, std::size_t max_seg_len,
                   DecodeMode mode, const Vocabulary& vocab, const PhoneMapping& mapping) {
  std::vector<Transcript> refs, hyps;
  refs.reserve(data.size());
  hyps.reserve(data.size());
  for (const auto& u : data) {
    refs.push_back({u.id, vocab.decode(u.labels)});
    hyps.push_back({u.id, vocab.decode(decode(u.features, params, max_seg_len, mode))});
  }
  return corpus_per(refs, hyps, mapping);
}

EpochStats sgd_epoch(const Dataset& data, ModelParams& params, double lr, double lambda,
                     std::size_t max_seg_len, const TrainConfig& config, int epoch) {
  if (!(lr >= 0.0)) throw Error("learning rate must be >= 0");
  const std::uint64_t epoch_seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng(epoch_seed).shuffle(order);

  EpochStats stats;
  ModelParams batch_grad;
  std::size_t in_batch = 0;
  auto apply = [&] {
    if (in_batch == 0) return;
    if (in_batch > 1) scale(batch_grad, 1.0 / static_cast<double>(in_batch));
    if (config.clip_norm > 0.0) {
      const double norm = std::sqrt(squared_norm(batch_grad));
      if (norm > config.clip_norm) {
        scale(batch_grad, config.clip_norm / norm);
        ++stats.clipped_updates;
      }
    }
    add_scaled(params, batch_grad, -lr);
    ++stats.updates;
    in_batch = 0;
  };

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Utterance& u = data[order[pos]];
    EncodeOptions opts{config.dropout, true, mix_seed(epoch_seed, pos + 1)};
    JointLoss l = joint_loss(u.features, u.labels, params, lambda, max_seg_len, opts, true);
    if (!std::isfinite(l.loss)) {
      throw Error("non-finite loss on utterance '" + u.id + "' in epoch " + std::to_string(epoch) +
                  " (ctc " + std::to_string(l.ctc_loss) + ", scrf " + std::to_string(l.scrf_loss) + ")");
    }
    stats.loss_total += l.loss;
    stats.loss_ctc += l.ctc_loss;
    stats.loss_scrf += l.scrf_loss;
    if (in_batch == 0) {
      batch_grad = std::move(l.grad);
    } else {
      add_scaled(batch_grad, l.grad, 1.0);
    }
    if (++in_batch == config.batch_size) apply();
  }
  apply();

  if (!data.empty()) {
    const double n = static_cast<double>(data.size());
    stats.loss_total /= n;
    stats.loss_ctc /= n;
    stats.loss_scrf /= n;
  }
  return stats;
}

double lr_schedule(std::span<const double> errors, double lr, double decay) {
  if (errors.size() < 2) return lr;
  return errors.back() >= errors[errors.size() - 2] ? lr * decay : lr;
}

double TrainState::learning_rate(const TrainConfig& config) const {
  double factor = 1.0;
  for (int k = 0; k < decay_count; ++k) factor *= config.lr_decay;
  return config.lr_init * factor;
}

TrainState initial_state(const ModelConfig& model, const TrainConfig& config) {
  TrainState s;
  s.params = init_model(model, config.seed);
  return s;
}

void train(TrainState& state, const ModelConfig& model, const TrainConfig& config,
           const TrainContext& ctx) {
  config.validate();
  check_alignable(ctx.train, model);
  for (int epoch = state.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    const bool pretrain = epoch <= config.pretrain_epochs;
    if (!pretrain && config.pretrain_epochs > 0 && epoch == config.pretrain_epochs + 1) {
      state.decay_count = 0;
      state.previous_error.reset();
    }
    const double lr = state.learning_rate(config);
    const double lambda = pretrain ? 1.0 : config.lambda;
    const EpochStats stats = sgd_epoch(ctx.train, state.params, lr, lambda, model.max_seg_len, config, epoch);

    const DecodeMode logged_mode =
        config.valid_mode ? *config.valid_mode : (pretrain ? DecodeMode::kCtc : config.resolved_valid_mode());
    const DecodeMode schedule_mode = pretrain ? DecodeMode::kCtc : config.resolved_valid_mode();
    const double logged_per =
        dataset_per(ctx.valid, state.params, model.max_seg_len, logged_mode, ctx.vocab, ctx.mapping);
    const double schedule_per =
        schedule_mode == logged_mode
            ? logged_per
            : dataset_per(ctx.valid, state.params, model.max_seg_len, schedule_mode, ctx.vocab, ctx.mapping);

    state.log.records.push_back({epoch, lr, stats.loss_total, stats.loss_ctc, stats.loss_scrf,
                                 logged_per, pretrain ? Phase::kPretrain : Phase::kJoint});
    if (state.previous_error) {
      const double errs[2] = {*state.previous_error, schedule_per};
      if (lr_schedule(errs, lr, config.lr_decay) != lr) ++state.decay_count;
    }
    state.previous_error = schedule_per;
    state.epochs_done = epoch;
    if (ctx.on_epoch) ctx.on_epoch(state, stats);
  }
}

void check_alignable(const Dataset& data, const ModelConfig& model) {
  for (const auto& u : data) {
    const std::size_t frames = subsampled_length(u.features.rows(), model.subsample);
    const std::size_t labels = u.labels.size();
    std::string why;
    if (labels == 0) {
      why = "has no labels";
    } else if (labels > frames) {
      why = "has " + std::to_string(labels) + " labels but only " + std::to_string(frames) +
            " frames after subsampling";
    } else if (labels * model.max_seg_len < frames) {
      why = "needs segments longer than max_seg_len=" + std::to_string(model.max_seg_len);
    } else if (ctc_min_frames(to_ctc_ids(u.labels)) > frames) {
      why = "has too many repeated labels for CTC in " + std::to_string(frames) + " frames";
    }
    if (!why.empty()) throw Error("utterance '" + u.id + "' is unalignable: " + why);
  }
}

}  // namespace segctc
