#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segctc/numerics.hpp"

namespace segctc {

enum class Activation { kTanh, kSigmoid };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

struct FeatureLayer {
  Matrix weight;  // F x F
  Matrix bias;    // F x 1
};

/// Segmental CRF head.
///
/// The score of labelling frames [s, n] with y is
///
///   f(y, s, n) = w . phi,  phi = act(W1 u_y + W2 [h_s; h_n] + b)
///
/// where u_y is row y of the label embedding matrix M. Optional extra
/// layers are applied to phi before the dot product.
struct ScrfParams {
  Matrix label_embedding;  // M:  |Y| x E
  Matrix label_weights;    // W1: F x E
  Matrix segment_weights;  // W2: F x 2*dim(h)
  Matrix bias;             // b:  F x 1
  std::vector<FeatureLayer> extra_layers;
  Matrix output_weights;   // w:  F x 1
  Activation activation = Activation::kTanh;

  std::size_t vocab_size() const { return label_embedding.rows(); }
  std::size_t feature_dim() const { return bias.rows(); }
  std::size_t state_dim() const { return segment_weights.cols() / 2; }
};

ScrfParams init_scrf(std::size_t vocab_size, std::size_t state_dim, std::size_t label_dim,
                     std::size_t feature_dim, std::size_t extra_layers, std::uint64_t seed,
                     Activation activation = Activation::kTanh);
ScrfParams zeros_like(const ScrfParams& params);
void collect_tensors(ScrfParams& params, std::vector<TensorRef>& out,
                     const std::string& prefix = "scrf");

/// Frame span [start, end], 0-based and inclusive.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

/// Contiguous cover of the frames, one segment per output label.
using Segmentation = std::vector<Segment>;

/// u = M one_hot(y).
std::vector<double> label_embedding(int label, const Matrix& embedding);

/// Context-aware segment embedding [h_start; h_end].
std::vector<double> segment_embedding(const Matrix& hidden, std::size_t start, std::size_t end);

/// Straight-line evaluation of f(y, [start, end]).
double segment_score(int label, std::size_t start, std::size_t end, const Matrix& hidden,
                     const ScrfParams& params);

/// Scores of every (label, end frame, duration) with duration <= max_len.
/// Entries whose duration exceeds end + 1 are never read.
class SegmentScoreTable {
 public:
  SegmentScoreTable(std::size_t frames, std::size_t max_len, std::size_t vocab);

  std::size_t frames() const { return frames_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t vocab() const { return vocab_; }

  double& at(std::size_t label, std::size_t end, std::size_t duration) {
    return scores_[index(label, end, duration)];
  }
  double at(std::size_t label, std::size_t end, std::size_t duration) const {
    return scores_[index(label, end, duration)];
  }

  /// Multiplies every score by `factor`.
  void scale(double factor);

 private:
  std::size_t index(std::size_t label, std::size_t end, std::size_t duration) const {
    return (end * max_len_ + (duration - 1)) * vocab_ + label;
  }

  std::size_t frames_;
  std::size_t max_len_;
  std::size_t vocab_;
  std::vector<double> scores_;
};

/// Fills the table in O(T' L |Y| F) using per-frame projections of W2, so
/// no per-segment state is stored.
SegmentScoreTable build_score_table(const Matrix& hidden, const ScrfParams& params,
                                    std::size_t max_len);

/// log Z(X, y): sum over segmentations of `labels`. kLogZero when none
/// exists under the length cap.
double scrf_log_numerator(const SegmentScoreTable& table, std::span<const int> labels);
double scrf_log_numerator(const Matrix& hidden, std::span<const int> labels,
                          const ScrfParams& params, std::size_t max_len);

/// log Z(X): sum over every (labels, segmentation) pair under the cap.
double scrf_log_partition(const SegmentScoreTable& table);
double scrf_log_partition(const Matrix& hidden, const ScrfParams& params, std::size_t max_len);

struct ScrfLoss {
  double loss = 0.0;
  double log_numerator = 0.0;
  double log_partition = 0.0;
  ScrfParams grad;     // empty unless gradients were requested
  Matrix grad_hidden;  // d loss / d hidden
};

/// -log P(y | X) = log Z(X) - log Z(X, y), with analytic gradients from
/// segment marginals of both dynamic programs.
ScrfLoss scrf_loss(const Matrix& hidden, std::span<const int> labels, const ScrfParams& params,
                   std::size_t max_len, bool with_gradients = true);

struct ScrfDecodeResult {
  LabelSequence labels;
  Segmentation segmentation;
  double score = 0.0;
};

/// Best (labels, segmentation) pair. Ties prefer the smaller label id, then
/// the shorter final segment.
ScrfDecodeResult scrf_viterbi_decode(const SegmentScoreTable& table);
ScrfDecodeResult scrf_viterbi_decode(const Matrix& hidden, const ScrfParams& params,
                                     std::size_t max_len);

}  // namespace segctc
