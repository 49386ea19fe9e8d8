#include "segctc/scrf.hpp"

#include <algorithm>
#include <cmath>

namespace segctc {
namespace {

double activate(Activation a, double x) {
  if (a == Activation::kTanh) return std::tanh(x);
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// derivative expressed through the activation output
double activation_slope(Activation a, double y) {
  return a == Activation::kTanh ? 1.0 - y * y : y * (1.0 - y);
}

void check_label(int label, std::size_t vocab) {
  if (label < 0 || static_cast<std::size_t>(label) >= vocab) {
    throw Error("label id " + std::to_string(label) + " out of range for vocabulary of size " +
                std::to_string(vocab));
  }
}

void check_hidden(const Matrix& hidden, const ScrfParams& params) {
  if (hidden.cols() != params.state_dim()) {
    throw Error("scrf: hidden state dim " + std::to_string(hidden.cols()) +
                " does not match head input dim " + std::to_string(params.state_dim()));
  }
}

// Per-frame halves of W2 h_t, and per-label W1 u_y + b.
struct Projections {
  Matrix start;  // T x F
  Matrix end;    // T x F
  Matrix label;  // |Y| x F
};

Projections project(const Matrix& hidden, const ScrfParams& p) {
  const std::size_t f = p.feature_dim();
  const std::size_t dh = p.state_dim();
  Projections out{Matrix(hidden.rows(), f), Matrix(hidden.rows(), f), Matrix(p.vocab_size(), f)};
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto h = hidden.row(t);
    for (std::size_t r = 0; r < f; ++r) {
      auto w = p.segment_weights.row(r);
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < dh; ++k) {
        a += w[k] * h[k];
        b += w[dh + k] * h[k];
      }
      out.start(t, r) = a;
      out.end(t, r) = b;
    }
  }
  for (std::size_t y = 0; y < p.vocab_size(); ++y) {
    auto row = out.label.row(y);
    std::copy(p.bias.values().begin(), p.bias.values().end(), row.begin());
    gemv_add(p.label_weights, p.label_embedding.row(y), row);
  }
  return out;
}

// acts[0] = act(pre); acts[k+1] = act(V_k acts[k] + c_k). Returns w . acts.back().
double feature_forward(const ScrfParams& p, std::span<const double> pre,
                       std::vector<std::vector<double>>& acts) {
  acts.resize(1 + p.extra_layers.size());
  acts[0].resize(pre.size());
  for (std::size_t k = 0; k < pre.size(); ++k) acts[0][k] = activate(p.activation, pre[k]);
  for (std::size_t l = 0; l < p.extra_layers.size(); ++l) {
    const auto& layer = p.extra_layers[l];
    auto& next = acts[l + 1];
    next.assign(layer.bias.values().begin(), layer.bias.values().end());
    gemv_add(layer.weight, acts[l], next);
    for (double& v : next) v = activate(p.activation, v);
  }
  return dot(p.output_weights.values(), acts.back());
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw Error("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "sigmoid";
}

ScrfParams init_scrf(std::size_t vocab_size, std::size_t state_dim, std::size_t label_dim,
                     std::size_t feature_dim, std::size_t extra_layers, std::uint64_t seed,
                     Activation activation) {
  if (vocab_size == 0) throw Error("scrf: empty vocabulary");
  ScrfParams p;
  p.label_embedding = seeded_init(vocab_size, label_dim, mix_seed(seed, 1), InitScheme::kUniformScaled);
  p.label_weights = seeded_init(feature_dim, label_dim, mix_seed(seed, 2), InitScheme::kUniformScaled);
  p.segment_weights =
      seeded_init(feature_dim, 2 * state_dim, mix_seed(seed, 3), InitScheme::kUniformScaled);
  p.bias = Matrix(feature_dim, 1);
  for (std::size_t l = 0; l < extra_layers; ++l) {
    p.extra_layers.push_back({seeded_init(feature_dim, feature_dim, mix_seed(seed, 10 + l),
                                          InitScheme::kUniformScaled),
                              Matrix(feature_dim, 1)});
  }
  p.output_weights = seeded_init(feature_dim, 1, mix_seed(seed, 4), InitScheme::kUniformScaled);
  p.activation = activation;
  return p;
}

ScrfParams zeros_like(const ScrfParams& params) {
  auto z = [](const Matrix& m) { return Matrix(m.rows(), m.cols()); };
  ScrfParams out;
  out.label_embedding = z(params.label_embedding);
  out.label_weights = z(params.label_weights);
  out.segment_weights = z(params.segment_weights);
  out.bias = z(params.bias);
  for (const auto& l : params.extra_layers) out.extra_layers.push_back({z(l.weight), z(l.bias)});
  out.output_weights = z(params.output_weights);
  out.activation = params.activation;
  return out;
}

void collect_tensors(ScrfParams& params, std::vector<TensorRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".label_embedding", &params.label_embedding});
  out.push_back({prefix + ".label_weights", &params.label_weights});
  out.push_back({prefix + ".segment_weights", &params.segment_weights});
  out.push_back({prefix + ".bias", &params.bias});
  for (std::size_t l = 0; l < params.extra_layers.size(); ++l) {
    const std::string base = prefix + ".extra" + std::to_string(l);
    out.push_back({base + ".weight", &params.extra_layers[l].weight});
    out.push_back({base + ".bias", &params.extra_layers[l].bias});
  }
  out.push_back({prefix + ".output_weights", &params.output_weights});
}

std::vector<double> label_embedding(int label, const Matrix& embedding) {
  check_label(label, embedding.rows());
  auto row = embedding.row(static_cast<std::size_t>(label));
  return {row.begin(), row.end()};
}

std::vector<double> segment_embedding(const Matrix& hidden, std::size_t start, std::size_t end) {
  if (start > end || end >= hidden.rows()) {
    throw Error("segment [" + std::to_string(start) + ", " + std::to_string(end) +
                "] out of range for " + std::to_string(hidden.rows()) + " frames");
  }
  std::vector<double> out(hidden.row(start).begin(), hidden.row(start).end());
  out.insert(out.end(), hidden.row(end).begin(), hidden.row(end).end());
  return out;
}

double segment_score(int label, std::size_t start, std::size_t end, const Matrix& hidden,
                     const ScrfParams& params) {
  check_hidden(hidden, params);
  const auto u = label_embedding(label, params.label_embedding);
  const auto x = segment_embedding(hidden, start, end);
  std::vector<double> pre(params.bias.values().begin(), params.bias.values().end());
  gemv_add(params.label_weights, u, pre);
  gemv_add(params.segment_weights, x, pre);
  std::vector<std::vector<double>> acts;
  return feature_forward(params, pre, acts);
}

SegmentScoreTable::SegmentScoreTable(std::size_t frames, std::size_t max_len, std::size_t vocab)
    : frames_(frames), max_len_(max_len), vocab_(vocab), scores_(frames * max_len * vocab, 0.0) {
  if (max_len == 0) throw Error("max_seg_len must be >= 1");
}

void SegmentScoreTable::scale(double factor) {
  for (double& s : scores_) s *= factor;
}

SegmentScoreTable build_score_table(const Matrix& hidden, const ScrfParams& params,
                                    std::size_t max_len) {
  check_hidden(hidden, params);
  const std::size_t frames = hidden.rows();
  const std::size_t vocab = params.vocab_size();
  SegmentScoreTable table(frames, max_len, vocab);
  const Projections proj = project(hidden, params);
  const std::size_t f = params.feature_dim();
  std::vector<double> pre(f);
  std::vector<std::vector<double>> acts;
  for (std::size_t end = 0; end < frames; ++end) {
    for (std::size_t d = 1; d <= std::min(max_len, end + 1); ++d) {
      const std::size_t start = end + 1 - d;
      for (std::size_t y = 0; y < vocab; ++y) {
        for (std::size_t k = 0; k < f; ++k) {
          pre[k] = proj.start(start, k) + proj.end(end, k) + proj.label(y, k);
        }
        table.at(y, end, d) = feature_forward(params, pre, acts);
      }
    }
  }
  return table;
}

namespace {

// alpha[j][t]: log-sum over ways to label the first t frames with labels[0..j).
Matrix numerator_forward(const SegmentScoreTable& table, std::span<const int> labels) {
  const std::size_t frames = table.frames();
  const std::size_t n = labels.size();
  Matrix alpha(n + 1, frames + 1, kLogZero);
  alpha(0, 0) = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const auto y = static_cast<std::size_t>(labels[j - 1]);
    for (std::size_t t = j; t <= frames; ++t) {
      double acc = kLogZero;
      for (std::size_t d = 1; d <= std::min(table.max_len(), t); ++d) {
        const double prev = alpha(j - 1, t - d);
        if (prev == kLogZero) continue;
        acc = log_add(acc, prev + table.at(y, t - 1, d));
      }
      alpha(j, t) = acc;
    }
  }
  return alpha;
}

// gamma[j][t]: log-sum over ways to label frames t.. with labels[j..).
Matrix numerator_backward(const SegmentScoreTable& table, std::span<const int> labels) {
  const std::size_t frames = table.frames();
  const std::size_t n = labels.size();
  Matrix gamma(n + 1, frames + 1, kLogZero);
  gamma(n, frames) = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    const auto y = static_cast<std::size_t>(labels[j]);
    for (std::size_t t = 0; t < frames; ++t) {
      double acc = kLogZero;
      for (std::size_t d = 1; d <= std::min(table.max_len(), frames - t); ++d) {
        const double next = gamma(j + 1, t + d);
        if (next == kLogZero) continue;
        acc = log_add(acc, table.at(y, t + d - 1, d) + next);
      }
      gamma(j, t) = acc;
    }
  }
  return gamma;
}

std::vector<double> partition_forward(const SegmentScoreTable& table) {
  const std::size_t frames = table.frames();
  std::vector<double> beta(frames + 1, kLogZero);
  beta[0] = 0.0;
  for (std::size_t t = 1; t <= frames; ++t) {
    double acc = kLogZero;
    for (std::size_t d = 1; d <= std::min(table.max_len(), t); ++d) {
      for (std::size_t y = 0; y < table.vocab(); ++y) {
        acc = log_add(acc, beta[t - d] + table.at(y, t - 1, d));
      }
    }
    beta[t] = acc;
  }
  return beta;
}

std::vector<double> partition_backward(const SegmentScoreTable& table) {
  const std::size_t frames = table.frames();
  std::vector<double> beta(frames + 1, kLogZero);
  beta[frames] = 0.0;
  for (std::size_t t = frames; t-- > 0;) {
    double acc = kLogZero;
    for (std::size_t d = 1; d <= std::min(table.max_len(), frames - t); ++d) {
      for (std::size_t y = 0; y < table.vocab(); ++y) {
        acc = log_add(acc, table.at(y, t + d - 1, d) + beta[t + d]);
      }
    }
    beta[t] = acc;
  }
  return beta;
}

void check_labels(std::span<const int> labels, const SegmentScoreTable& table) {
  if (labels.empty()) throw Error("empty label sequence");
  if (labels.size() > table.frames()) throw Error("more labels than frames");
  for (int y : labels) check_label(y, table.vocab());
}

}  // namespace

double scrf_log_numerator(const SegmentScoreTable& table, std::span<const int> labels) {
  check_labels(labels, table);
  return numerator_forward(table, labels)(labels.size(), table.frames());
}

double scrf_log_numerator(const Matrix& hidden, std::span<const int> labels,
                          const ScrfParams& params, std::size_t max_len) {
  return scrf_log_numerator(build_score_table(hidden, params, max_len), labels);
}

double scrf_log_partition(const SegmentScoreTable& table) {
  if (table.frames() == 0) throw Error("empty utterance");
  return partition_forward(table).back();
}

double scrf_log_partition(const Matrix& hidden, const ScrfParams& params, std::size_t max_len) {
  return scrf_log_partition(build_score_table(hidden, params, max_len));
}

ScrfLoss scrf_loss(const Matrix& hidden, std::span<const int> labels, const ScrfParams& params,
                   std::size_t max_len, bool with_gradients) {
  const SegmentScoreTable table = build_score_table(hidden, params, max_len);
  check_labels(labels, table);
  const std::size_t frames = table.frames();
  const std::size_t n = labels.size();

  const Matrix alpha = numerator_forward(table, labels);
  const double log_num = alpha(n, frames);
  if (log_num == kLogZero) throw Error("label sequence unreachable");
  const std::vector<double> beta = partition_forward(table);
  const double log_part = beta[frames];

  ScrfLoss result;
  result.log_numerator = log_num;
  result.log_partition = log_part;
  result.loss = log_part - log_num;
  if (!with_gradients) return result;

  // d loss / d score = partition marginal - numerator marginal
  SegmentScoreTable d_score(frames, max_len, table.vocab());
  const std::vector<double> beta_back = partition_backward(table);
  for (std::size_t end = 0; end < frames; ++end) {
    for (std::size_t d = 1; d <= std::min(max_len, end + 1); ++d) {
      const std::size_t before = end + 1 - d;
      for (std::size_t y = 0; y < table.vocab(); ++y) {
        d_score.at(y, end, d) =
            std::exp(beta[before] + table.at(y, end, d) + beta_back[end + 1] - log_part);
      }
    }
  }
  const Matrix gamma = numerator_backward(table, labels);
  for (std::size_t j = 1; j <= n; ++j) {
    const auto y = static_cast<std::size_t>(labels[j - 1]);
    for (std::size_t t = j; t <= frames; ++t) {
      if (gamma(j, t) == kLogZero) continue;
      for (std::size_t d = 1; d <= std::min(max_len, t); ++d) {
        const double prev = alpha(j - 1, t - d);
        if (prev == kLogZero) continue;
        d_score.at(y, t - 1, d) -= std::exp(prev + table.at(y, t - 1, d) + gamma(j, t) - log_num);
      }
    }
  }

  // backpropagate through the feature network
  const std::size_t f = params.feature_dim();
  const std::size_t dh = params.state_dim();
  const Projections proj = project(hidden, params);
  Matrix d_start(frames, f), d_end(frames, f), d_label(params.vocab_size(), f);
  result.grad = zeros_like(params);
  ScrfParams& g = result.grad;
  std::vector<double> pre(f), delta, next_delta;
  std::vector<std::vector<double>> acts;
  for (std::size_t end = 0; end < frames; ++end) {
    for (std::size_t d = 1; d <= std::min(max_len, end + 1); ++d) {
      const std::size_t start = end + 1 - d;
      for (std::size_t y = 0; y < table.vocab(); ++y) {
        const double gs = d_score.at(y, end, d);
        if (gs == 0.0) continue;
        for (std::size_t k = 0; k < f; ++k) {
          pre[k] = proj.start(start, k) + proj.end(end, k) + proj.label(y, k);
        }
        feature_forward(params, pre, acts);
        const auto& top = acts.back();
        delta.assign(f, 0.0);
        for (std::size_t k = 0; k < f; ++k) {
          g.output_weights[k] += gs * top[k];
          delta[k] = gs * params.output_weights[k];
        }
        for (std::size_t l = params.extra_layers.size(); l-- > 0;) {
          const auto& out = acts[l + 1];
          for (std::size_t k = 0; k < f; ++k) delta[k] *= activation_slope(params.activation, out[k]);
          outer_add(g.extra_layers[l].weight, delta, acts[l]);
          for (std::size_t k = 0; k < f; ++k) g.extra_layers[l].bias[k] += delta[k];
          next_delta.assign(f, 0.0);
          gemv_t_add(params.extra_layers[l].weight, delta, next_delta);
          std::swap(delta, next_delta);
        }
        for (std::size_t k = 0; k < f; ++k) {
          const double dz = delta[k] * activation_slope(params.activation, acts[0][k]);
          d_start(start, k) += dz;
          d_end(end, k) += dz;
          d_label(y, k) += dz;
        }
      }
    }
  }

  result.grad_hidden = Matrix(frames, dh);
  for (std::size_t t = 0; t < frames; ++t) {
    auto h = hidden.row(t);
    auto gh = result.grad_hidden.row(t);
    for (std::size_t r = 0; r < f; ++r) {
      const double ds = d_start(t, r);
      const double de = d_end(t, r);
      if (ds == 0.0 && de == 0.0) continue;
      auto w = params.segment_weights.row(r);
      auto gw = g.segment_weights.row(r);
      for (std::size_t k = 0; k < dh; ++k) {
        gw[k] += ds * h[k];
        gw[dh + k] += de * h[k];
        gh[k] += ds * w[k] + de * w[dh + k];
      }
    }
  }
  for (std::size_t y = 0; y < params.vocab_size(); ++y) {
    auto dc = d_label.row(y);
    for (std::size_t k = 0; k < f; ++k) g.bias[k] += dc[k];
    outer_add(g.label_weights, dc, params.label_embedding.row(y));
    gemv_t_add(params.label_weights, dc, g.label_embedding.row(y));
  }
  return result;
}

ScrfDecodeResult scrf_viterbi_decode(const SegmentScoreTable& table) {
  const std::size_t frames = table.frames();
  if (frames == 0) throw Error("empty utterance");
  std::vector<double> best(frames + 1, kLogZero);
  std::vector<std::size_t> best_dur(frames + 1, 0);
  std::vector<int> best_label(frames + 1, -1);
  best[0] = 0.0;
  for (std::size_t t = 1; t <= frames; ++t) {
    for (std::size_t y = 0; y < table.vocab(); ++y) {
      for (std::size_t d = 1; d <= std::min(table.max_len(), t); ++d) {
        const double cand = best[t - d] + table.at(y, t - 1, d);
        if (best_label[t] < 0 || cand > best[t]) {
          best[t] = cand;
          best_dur[t] = d;
          best_label[t] = static_cast<int>(y);
        }
      }
    }
  }
  ScrfDecodeResult out;
  out.score = best[frames];
  for (std::size_t t = frames; t > 0;) {
    const std::size_t d = best_dur[t];
    out.labels.push_back(best_label[t]);
    out.segmentation.push_back({t - d, t - 1});
    t -= d;
  }
  std::reverse(out.labels.begin(), out.labels.end());
  std::reverse(out.segmentation.begin(), out.segmentation.end());
  return out;
}

ScrfDecodeResult scrf_viterbi_decode(const Matrix& hidden, const ScrfParams& params,
                                     std::size_t max_len) {
  return scrf_viterbi_decode(build_score_table(hidden, params, max_len));
}

}  // namespace segctc
