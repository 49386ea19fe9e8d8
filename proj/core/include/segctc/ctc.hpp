#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segctc/numerics.hpp"

namespace segctc {

/// CTC output id of the blank. Real labels use ids 1..|Y|, i.e. the
/// vocabulary id plus one.
inline constexpr int kBlank = 0;

/// Linear projection from encoder states to |Y|+1 logits.
struct CtcHead {
  Matrix weight;  // (|Y|+1) x 2H
  Matrix bias;    // (|Y|+1) x 1

  std::size_t num_outputs() const { return weight.rows(); }
};

CtcHead init_ctc_head(std::size_t vocab_size, std::size_t state_dim, std::uint64_t seed);
CtcHead zeros_like(const CtcHead& head);
void collect_tensors(CtcHead& head, std::vector<TensorRef>& out, const std::string& prefix = "ctc");

/// Per-frame distributions over {blank} + labels.
struct FramePosteriors {
  Matrix probs;      // T' x (|Y|+1), rows sum to one
  Matrix log_probs;  // log-softmax of the same logits

  std::size_t frames() const { return probs.rows(); }
  std::size_t num_outputs() const { return probs.cols(); }
};

Matrix ctc_logits(const Matrix& hidden, const CtcHead& head);
FramePosteriors posteriors_from_logits(const Matrix& logits);
/// Wraps an explicit probability table (rows must already be normalized).
FramePosteriors posteriors_from_probs(const Matrix& probs);
FramePosteriors ctc_posteriors(const Matrix& hidden, const CtcHead& head);

/// Merge adjacent repeats, then drop blanks.
LabelSequence collapse(std::span<const int> path);

/// Minimum frames needed to emit `labels`: one per label plus a blank
/// between each pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const int> labels);

/// log P(y | X) by the forward recursion with two rolling rows.
/// kLogZero when `labels` cannot be aligned.
double ctc_log_likelihood(const FramePosteriors& posteriors, std::span<const int> labels);

struct CtcLoss {
  double loss = 0.0;
  Matrix grad_logits;  // T' x (|Y|+1): softmax minus label occupancy
};

/// -log P(y | X) with gradient with respect to the logits that produced
/// `posteriors`. Throws Error("label sequence unalignable") when no path
/// collapses to `labels`.
CtcLoss ctc_loss(const FramePosteriors& posteriors, std::span<const int> labels,
                 bool with_gradients = true);

/// Accumulates head gradients and returns d loss / d hidden.
Matrix ctc_head_backward(const Matrix& hidden, const CtcHead& head, const Matrix& grad_logits,
                         CtcHead& grad);

/// Per-frame argmax (ties go to the lower id, so blank first), then collapse.
LabelSequence ctc_best_path_decode(const FramePosteriors& posteriors);

}  // namespace segctc
