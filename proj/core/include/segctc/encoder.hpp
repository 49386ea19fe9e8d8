#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segctc/numerics.hpp"

namespace segctc {

/// Weights of one LSTM direction. Gate blocks are stacked in the order
/// input, forget, candidate, output; each block has `hidden` rows.
struct LstmGates {
  Matrix input_weights;      // 4H x in
  Matrix recurrent_weights;  // 4H x H
  Matrix bias;               // 4H x 1

  std::size_t hidden_dim() const { return recurrent_weights.cols(); }
  std::size_t input_dim() const { return input_weights.cols(); }
};

/// Activations of a single LSTM step, kept for backpropagation.
struct LstmStep {
  std::vector<double> hidden;
  std::vector<double> cell;
  std::vector<double> gates;  // post-activation, 4H
  std::vector<double> tanh_cell;
};

/// One step of the standard LSTM recurrence:
///   i = sig(.), f = sig(.), g = tanh(.), o = sig(.)
///   c = f * c_prev + i * g,  h = o * tanh(c)
LstmStep lstm_cell(std::span<const double> prev_hidden, std::span<const double> prev_cell,
                   std::span<const double> input, const LstmGates& gates);

/// Backward through one step. `d_hidden` and `d_cell` are the total
/// gradients arriving at this step's outputs. Accumulates into `grad` and
/// writes (overwrites) the three d_* output spans.
void lstm_cell_backward(const LstmGates& gates, std::span<const double> prev_hidden,
                        std::span<const double> prev_cell, std::span<const double> input,
                        const LstmStep& step, std::span<const double> d_hidden,
                        std::span<const double> d_cell, LstmGates& grad,
                        std::span<double> d_prev_hidden, std::span<double> d_prev_cell,
                        std::span<double> d_input);

struct LstmLayer {
  LstmGates forward;
  LstmGates backward;
};

/// Bidirectional multi-layer LSTM. Between consecutive layers the output
/// frames are grouped `subsample[l]` at a time and concatenated, so the
/// following layer sees subsample[l] times fewer, subsample[l] times wider
/// frames. A short trailing group repeats the last frame.
struct EncoderParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<std::size_t> subsample;  // one factor per layer boundary
  std::vector<LstmLayer> layers;

  std::size_t output_dim() const { return 2 * hidden_dim; }
  std::size_t layer_input_dim(std::size_t layer) const;
  std::size_t output_length(std::size_t frames) const;
};

/// Frame count after successive ceil divisions by each factor.
std::size_t subsampled_length(std::size_t frames, std::span<const std::size_t> factors);

/// Weights uniform-scaled per matrix, biases zero except the forget gate
/// block, which starts at 1.0.
EncoderParams init_encoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers,
                           std::vector<std::size_t> subsample, std::uint64_t seed);

EncoderParams zeros_like(const EncoderParams& params);

void collect_tensors(EncoderParams& params, std::vector<TensorRef>& out,
                     const std::string& prefix = "encoder");

struct EncodeOptions {
  double dropout_rate = 0.0;
  bool training = false;
  std::uint64_t seed = 0;
};

/// Everything the backward pass needs from a forward pass.
struct EncoderTape {
  struct Layer {
    Matrix input;         // after subsampling and dropout
    Matrix dropout_mask;  // empty when dropout was inactive
    std::vector<LstmStep> forward_steps;
    std::vector<LstmStep> backward_steps;  // indexed by frame, not by step order
  };
  std::vector<Layer> layers;
};

/// Runs the encoder over a T x D feature matrix and returns T' x 2H states,
/// forward direction in the first H columns. Dropout (inverted scaling) is
/// applied to every layer input, and only when options.training is set.
Matrix encode(const Matrix& features, const EncoderParams& params,
              const EncodeOptions& options = {}, EncoderTape* tape = nullptr);

/// Accumulates parameter gradients into `grad` given d loss / d output.
void encode_backward(const EncoderParams& params, const EncoderTape& tape,
                     const Matrix& d_output, EncoderParams& grad);

}  // namespace segctc
