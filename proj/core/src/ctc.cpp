#include "segctc/ctc.hpp"

#include <algorithm>
#include <cmath>

namespace segctc {

CtcHead init_ctc_head(std::size_t vocab_size, std::size_t state_dim, std::uint64_t seed) {
  return {seeded_init(vocab_size + 1, state_dim, mix_seed(seed, 1), InitScheme::kUniformScaled),
          Matrix(vocab_size + 1, 1)};
}

CtcHead zeros_like(const CtcHead& head) {
  return {Matrix(head.weight.rows(), head.weight.cols()), Matrix(head.bias.rows(), head.bias.cols())};
}

void collect_tensors(CtcHead& head, std::vector<TensorRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &head.weight});
  out.push_back({prefix + ".bias", &head.bias});
}

Matrix ctc_logits(const Matrix& hidden, const CtcHead& head) {
  if (hidden.cols() != head.weight.cols()) {
    throw Error("ctc: hidden state dim " + std::to_string(hidden.cols()) +
                " does not match head input dim " + std::to_string(head.weight.cols()));
  }
  Matrix logits(hidden.rows(), head.num_outputs());
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto row = logits.row(t);
    std::copy(head.bias.values().begin(), head.bias.values().end(), row.begin());
    gemv_add(head.weight, hidden.row(t), row);
  }
  return logits;
}

FramePosteriors posteriors_from_logits(const Matrix& logits) {
  FramePosteriors p{Matrix(logits.rows(), logits.cols()), Matrix(logits.rows(), logits.cols())};
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto lp = log_softmax(logits.row(t));
    const auto pr = softmax(logits.row(t));
    std::copy(lp.begin(), lp.end(), p.log_probs.row(t).begin());
    std::copy(pr.begin(), pr.end(), p.probs.row(t).begin());
  }
  return p;
}

FramePosteriors posteriors_from_probs(const Matrix& probs) {
  FramePosteriors p{probs, Matrix(probs.rows(), probs.cols())};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    p.log_probs[i] = probs[i] > 0.0 ? std::log(probs[i]) : kLogZero;
  }
  return p;
}

FramePosteriors ctc_posteriors(const Matrix& hidden, const CtcHead& head) {
  return posteriors_from_logits(ctc_logits(hidden, head));
}

LabelSequence collapse(std::span<const int> path) {
  LabelSequence out;
  int prev = -1;
  for (int id : path) {
    if (id != prev && id != kBlank) out.push_back(id);
    prev = id;
  }
  return out;
}

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t j = 1; j < labels.size(); ++j) {
    if (labels[j] == labels[j - 1]) ++n;
  }
  return n;
}

namespace {

std::vector<int> expand(std::span<const int> labels, std::size_t outputs) {
  std::vector<int> ext(2 * labels.size() + 1, kBlank);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] <= kBlank || static_cast<std::size_t>(labels[j]) >= outputs) {
      throw Error("ctc label id " + std::to_string(labels[j]) + " out of range");
    }
    ext[2 * j + 1] = labels[j];
  }
  return ext;
}

bool can_skip(const std::vector<int>& ext, std::size_t s) {
  return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2];
}

}  // namespace

double ctc_log_likelihood(const FramePosteriors& posteriors, std::span<const int> labels) {
  const std::size_t frames = posteriors.frames();
  if (frames == 0) throw Error("empty utterance");
  const auto ext = expand(labels, posteriors.num_outputs());
  const std::size_t states = ext.size();
  std::vector<double> prev(states, kLogZero), cur(states, kLogZero);
  prev[0] = posteriors.log_probs(0, kBlank);
  if (states > 1) prev[1] = posteriors.log_probs(0, static_cast<std::size_t>(ext[1]));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(ext, s)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kLogZero ? kLogZero : acc + posteriors.log_probs(t, static_cast<std::size_t>(ext[s]));
    }
    std::swap(prev, cur);
  }
  double ll = prev[states - 1];
  if (states > 1) ll = log_add(ll, prev[states - 2]);
  return ll;
}

CtcLoss ctc_loss(const FramePosteriors& posteriors, std::span<const int> labels, bool with_gradients) {
  const std::size_t frames = posteriors.frames();
  if (frames == 0) throw Error("empty utterance");
  if (frames < ctc_min_frames(labels)) throw Error("label sequence unalignable");
  const auto ext = expand(labels, posteriors.num_outputs());
  const std::size_t states = ext.size();
  auto lp = [&](std::size_t t, std::size_t s) {
    return posteriors.log_probs(t, static_cast<std::size_t>(ext[s]));
  };

  Matrix alpha(frames, states, kLogZero);
  alpha(0, 0) = lp(0, 0);
  if (states > 1) alpha(0, 1) = lp(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (can_skip(ext, s)) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kLogZero ? kLogZero : acc + lp(t, s);
    }
  }
  double ll = alpha(frames - 1, states - 1);
  if (states > 1) ll = log_add(ll, alpha(frames - 1, states - 2));
  if (ll == kLogZero) throw Error("label sequence unalignable");

  CtcLoss result;
  result.loss = -ll;
  if (!with_gradients) return result;

  Matrix beta(frames, states, kLogZero);
  beta(frames - 1, states - 1) = lp(frames - 1, states - 1);
  if (states > 1) beta(frames - 1, states - 2) = lp(frames - 1, states - 2);
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(ext, s + 2)) acc = log_add(acc, beta(t + 1, s + 2));
      beta(t, s) = acc == kLogZero ? kLogZero : acc + lp(t, s);
    }
  }

  // alpha(t,s) + beta(t,s) counts the emission at t twice
  result.grad_logits = posteriors.probs;
  std::vector<double> occupancy(posteriors.num_outputs());
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (std::size_t s = 0; s < states; ++s) {
      const double v = alpha(t, s) + beta(t, s);
      if (v == kLogZero || std::isnan(v)) continue;
      auto k = static_cast<std::size_t>(ext[s]);
      occupancy[k] = log_add(occupancy[k], v - lp(t, s));
    }
    for (std::size_t k = 0; k < occupancy.size(); ++k) {
      if (occupancy[k] != kLogZero) result.grad_logits(t, k) -= std::exp(occupancy[k] - ll);
    }
  }
  return result;
}

Matrix ctc_head_backward(const Matrix& hidden, const CtcHead& head, const Matrix& grad_logits,
                         CtcHead& grad) {
  Matrix d_hidden(hidden.rows(), hidden.cols());
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto g = grad_logits.row(t);
    for (std::size_t k = 0; k < g.size(); ++k) grad.bias[k] += g[k];
    outer_add(grad.weight, g, hidden.row(t));
    gemv_t_add(head.weight, g, d_hidden.row(t));
  }
  return d_hidden;
}

LabelSequence ctc_best_path_decode(const FramePosteriors& posteriors) {
  std::vector<int> path(posteriors.frames());
  for (std::size_t t = 0; t < posteriors.frames(); ++t) {
    auto row = posteriors.log_probs.row(t);
    path[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return collapse(path);
}

}  // namespace segctc
