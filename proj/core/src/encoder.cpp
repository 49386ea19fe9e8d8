#include "segctc/encoder.hpp"

#include <cmath>

namespace segctc {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LstmGates init_gates(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
  LstmGates g;
  g.input_weights = seeded_init(4 * hidden, input_dim, mix_seed(seed, 1), InitScheme::kUniformScaled);
  g.recurrent_weights = seeded_init(4 * hidden, hidden, mix_seed(seed, 2), InitScheme::kUniformScaled);
  g.bias = Matrix(4 * hidden, 1);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) g.bias[k] = 1.0;
  return g;
}

LstmGates zeros_like(const LstmGates& g) {
  return {Matrix(g.input_weights.rows(), g.input_weights.cols()),
          Matrix(g.recurrent_weights.rows(), g.recurrent_weights.cols()),
          Matrix(g.bias.rows(), g.bias.cols())};
}

// Concatenates `factor` consecutive rows; the final group repeats the last row.
Matrix group_frames(const Matrix& in, std::size_t factor) {
  if (factor == 1) return in;
  const std::size_t frames = (in.rows() + factor - 1) / factor;
  const std::size_t dim = in.cols();
  Matrix out(frames, dim * factor);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t m = 0; m < factor; ++m) {
      const std::size_t src = std::min(i * factor + m, in.rows() - 1);
      auto from = in.row(src);
      std::copy(from.begin(), from.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(m * dim));
    }
  }
  return out;
}

Matrix ungroup_gradient(const Matrix& d_grouped, std::size_t factor, std::size_t frames) {
  if (factor == 1) return d_grouped;
  const std::size_t dim = d_grouped.cols() / factor;
  Matrix out(frames, dim);
  for (std::size_t i = 0; i < d_grouped.rows(); ++i) {
    for (std::size_t m = 0; m < factor; ++m) {
      const std::size_t dst = std::min(i * factor + m, frames - 1);
      auto src = d_grouped.row(i).subspan(m * dim, dim);
      auto to = out.row(dst);
      for (std::size_t k = 0; k < dim; ++k) to[k] += src[k];
    }
  }
  return out;
}

void check_gates(const LstmGates& g, std::size_t hidden, std::size_t input) {
  if (g.recurrent_weights.rows() != 4 * hidden || g.recurrent_weights.cols() != hidden ||
      g.input_weights.rows() != 4 * hidden || g.input_weights.cols() != input ||
      g.bias.rows() != 4 * hidden) {
    throw Error("lstm_cell: dimension mismatch");
  }
}

}  // namespace

LstmStep lstm_cell(std::span<const double> prev_hidden, std::span<const double> prev_cell,
                   std::span<const double> input, const LstmGates& gates) {
  const std::size_t h = prev_hidden.size();
  check_gates(gates, h, input.size());
  if (prev_cell.size() != h) throw Error("lstm_cell: dimension mismatch");

  LstmStep step;
  step.gates.assign(gates.bias.values().begin(), gates.bias.values().end());
  gemv_add(gates.input_weights, input, step.gates);
  gemv_add(gates.recurrent_weights, prev_hidden, step.gates);
  for (std::size_t k = 0; k < h; ++k) {
    step.gates[k] = sigmoid(step.gates[k]);
    step.gates[h + k] = sigmoid(step.gates[h + k]);
    step.gates[2 * h + k] = std::tanh(step.gates[2 * h + k]);
    step.gates[3 * h + k] = sigmoid(step.gates[3 * h + k]);
  }
  step.cell.resize(h);
  step.tanh_cell.resize(h);
  step.hidden.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    step.cell[k] = step.gates[h + k] * prev_cell[k] + step.gates[k] * step.gates[2 * h + k];
    step.tanh_cell[k] = std::tanh(step.cell[k]);
    step.hidden[k] = step.gates[3 * h + k] * step.tanh_cell[k];
  }
  return step;
}

void lstm_cell_backward(const LstmGates& gates, std::span<const double> prev_hidden,
                        std::span<const double> prev_cell, std::span<const double> input,
                        const LstmStep& step, std::span<const double> d_hidden,
                        std::span<const double> d_cell, LstmGates& grad,
                        std::span<double> d_prev_hidden, std::span<double> d_prev_cell,
                        std::span<double> d_input) {
  const std::size_t h = prev_hidden.size();
  std::vector<double> d_pre(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i = step.gates[k];
    const double f = step.gates[h + k];
    const double g = step.gates[2 * h + k];
    const double o = step.gates[3 * h + k];
    const double tc = step.tanh_cell[k];
    const double dc = d_cell[k] + d_hidden[k] * o * (1.0 - tc * tc);
    d_pre[k] = dc * g * i * (1.0 - i);
    d_pre[h + k] = dc * prev_cell[k] * f * (1.0 - f);
    d_pre[2 * h + k] = dc * i * (1.0 - g * g);
    d_pre[3 * h + k] = d_hidden[k] * tc * o * (1.0 - o);
    d_prev_cell[k] = dc * f;
  }
  for (std::size_t k = 0; k < 4 * h; ++k) grad.bias[k] += d_pre[k];
  outer_add(grad.input_weights, d_pre, input);
  outer_add(grad.recurrent_weights, d_pre, prev_hidden);
  std::fill(d_input.begin(), d_input.end(), 0.0);
  std::fill(d_prev_hidden.begin(), d_prev_hidden.end(), 0.0);
  gemv_t_add(gates.input_weights, d_pre, d_input);
  gemv_t_add(gates.recurrent_weights, d_pre, d_prev_hidden);
}

std::size_t EncoderParams::layer_input_dim(std::size_t layer) const {
  if (layer == 0) return input_dim;
  return output_dim() * subsample[layer - 1];
}

std::size_t EncoderParams::output_length(std::size_t frames) const {
  return subsampled_length(frames, subsample);
}

std::size_t subsampled_length(std::size_t frames, std::span<const std::size_t> factors) {
  for (std::size_t f : factors) frames = (frames + f - 1) / f;
  return frames;
}

EncoderParams init_encoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers,
                           std::vector<std::size_t> subsample, std::uint64_t seed) {
  if (layers < 1) throw Error("encoder needs at least one layer");
  if (hidden_dim < 1) throw Error("encoder hidden_dim must be >= 1");
  if (subsample.size() != layers - 1) {
    throw Error("encoder: expected " + std::to_string(layers - 1) + " subsample factors, got " +
                std::to_string(subsample.size()));
  }
  for (std::size_t f : subsample) {
    if (f < 1) throw Error("encoder: subsample factors must be >= 1");
  }
  EncoderParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.subsample = std::move(subsample);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = p.layer_input_dim(l);
    LstmLayer layer;
    layer.forward = init_gates(in, hidden_dim, mix_seed(seed, 2 * l));
    layer.backward = init_gates(in, hidden_dim, mix_seed(seed, 2 * l + 1));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams z = params;
  for (auto& layer : z.layers) {
    layer.forward = zeros_like(layer.forward);
    layer.backward = zeros_like(layer.backward);
  }
  return z;
}

void collect_tensors(EncoderParams& params, std::vector<TensorRef>& out, const std::string& prefix) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      LstmGates& g = dir == 0 ? params.layers[l].forward : params.layers[l].backward;
      const std::string base = prefix + ".layer" + std::to_string(l) + (dir == 0 ? ".fwd" : ".bwd");
      out.push_back({base + ".input_weights", &g.input_weights});
      out.push_back({base + ".recurrent_weights", &g.recurrent_weights});
      out.push_back({base + ".bias", &g.bias});
    }
  }
}

Matrix encode(const Matrix& features, const EncoderParams& params, const EncodeOptions& options,
              EncoderTape* tape) {
  if (features.rows() == 0) throw Error("empty utterance");
  if (features.cols() != params.input_dim) {
    throw Error("encode: feature dim " + std::to_string(features.cols()) +
                " does not match encoder input dim " + std::to_string(params.input_dim));
  }
  if (!(options.dropout_rate >= 0.0 && options.dropout_rate < 1.0)) {
    throw Error("encode: dropout rate must be in [0, 1)");
  }
  const bool use_dropout = options.training && options.dropout_rate > 0.0;
  const std::size_t h = params.hidden_dim;
  if (tape) tape->layers.clear();

  Matrix current = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (l > 0) current = group_frames(current, params.subsample[l - 1]);
    Matrix mask;
    if (use_dropout) {
      mask = Matrix(current.rows(), current.cols());
      Rng rng(mix_seed(options.seed, l));
      const double keep_scale = 1.0 / (1.0 - options.dropout_rate);
      for (std::size_t i = 0; i < current.size(); ++i) {
        mask[i] = rng.uniform() < options.dropout_rate ? 0.0 : keep_scale;
        current[i] *= mask[i];
      }
    }

    const std::size_t frames = current.rows();
    const LstmLayer& layer = params.layers[l];
    Matrix out(frames, 2 * h);
    std::vector<LstmStep> fwd(frames), bwd(frames);
    std::vector<double> zeros(h, 0.0);

    for (std::size_t t = 0; t < frames; ++t) {
      std::span<const double> ph = t == 0 ? std::span<const double>(zeros) : fwd[t - 1].hidden;
      std::span<const double> pc = t == 0 ? std::span<const double>(zeros) : fwd[t - 1].cell;
      fwd[t] = lstm_cell(ph, pc, current.row(t), layer.forward);
      std::copy(fwd[t].hidden.begin(), fwd[t].hidden.end(), out.row(t).begin());
    }
    for (std::size_t t = frames; t-- > 0;) {
      std::span<const double> ph = t + 1 == frames ? std::span<const double>(zeros) : bwd[t + 1].hidden;
      std::span<const double> pc = t + 1 == frames ? std::span<const double>(zeros) : bwd[t + 1].cell;
      bwd[t] = lstm_cell(ph, pc, current.row(t), layer.backward);
      std::copy(bwd[t].hidden.begin(), bwd[t].hidden.end(),
                out.row(t).begin() + static_cast<std::ptrdiff_t>(h));
    }

    if (tape) {
      tape->layers.push_back({std::move(current), std::move(mask), std::move(fwd), std::move(bwd)});
    }
    current = std::move(out);
  }
  return current;
}

void encode_backward(const EncoderParams& params, const EncoderTape& tape, const Matrix& d_output,
                     EncoderParams& grad) {
  const std::size_t h = params.hidden_dim;
  std::vector<double> zeros(h, 0.0);
  Matrix d_out = d_output;

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& rec = tape.layers[l];
    const LstmLayer& layer = params.layers[l];
    LstmLayer& g = grad.layers[l];
    const std::size_t frames = rec.input.rows();
    Matrix d_in(frames, rec.input.cols());
    std::vector<double> dh(h), dc(h, 0.0), dph(h), dpc(h), dx(rec.input.cols());

    // forward direction: steps ran t = 0..T-1, so unroll from the end
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    std::vector<double> carry_h(h, 0.0);
    for (std::size_t t = frames; t-- > 0;) {
      for (std::size_t k = 0; k < h; ++k) dh[k] = d_out(t, k) + carry_h[k];
      std::span<const double> ph = t == 0 ? std::span<const double>(zeros) : rec.forward_steps[t - 1].hidden;
      std::span<const double> pc = t == 0 ? std::span<const double>(zeros) : rec.forward_steps[t - 1].cell;
      lstm_cell_backward(layer.forward, ph, pc, rec.input.row(t), rec.forward_steps[t], dh, dc,
                         g.forward, dph, dpc, dx);
      carry_h = dph;
      dc = dpc;
      auto row = d_in.row(t);
      for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
    }

    // backward direction: steps ran t = T-1..0
    std::fill(dc.begin(), dc.end(), 0.0);
    std::fill(carry_h.begin(), carry_h.end(), 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < h; ++k) dh[k] = d_out(t, h + k) + carry_h[k];
      const bool last = t + 1 == frames;
      std::span<const double> ph = last ? std::span<const double>(zeros) : rec.backward_steps[t + 1].hidden;
      std::span<const double> pc = last ? std::span<const double>(zeros) : rec.backward_steps[t + 1].cell;
      lstm_cell_backward(layer.backward, ph, pc, rec.input.row(t), rec.backward_steps[t], dh, dc,
                         g.backward, dph, dpc, dx);
      carry_h = dph;
      dc = dpc;
      auto row = d_in.row(t);
      for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
    }

    if (l == 0) break;
    if (!rec.dropout_mask.empty()) {
      for (std::size_t i = 0; i < d_in.size(); ++i) d_in[i] *= rec.dropout_mask[i];
    }
    const std::size_t prev_frames = tape.layers[l - 1].input.rows();
    d_out = ungroup_gradient(d_in, params.subsample[l - 1], prev_frames);
  }
}

}  // namespace segctc
