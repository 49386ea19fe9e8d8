#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "segctc/ctc.hpp"
#include "segctc/scrf.hpp"

namespace segctc::oracle {

// Deliberately naive reference computations. They enumerate the latent
// structures the dynamic programs sum over and are only usable on tiny
// instances; each guards its input size.

inline constexpr std::size_t kMaxScrfFrames = 8;
inline constexpr std::size_t kMaxScrfVocab = 4;
inline constexpr std::size_t kMaxCtcFrames = 8;
inline constexpr std::size_t kMaxCtcLabels = 3;

/// Every cover of `frames` frames by `segments` contiguous segments of
/// length <= max_len, in lexicographic order of segment lengths.
std::vector<Segmentation> enumerate_segmentations(std::size_t frames, std::size_t segments,
                                                  std::size_t max_len);

/// Number of such covers by the composition recurrence.
std::size_t count_segmentations(std::size_t frames, std::size_t segments, std::size_t max_len);

/// Every label sequence of exactly `length` symbols over `vocab` ids.
std::vector<LabelSequence> enumerate_label_sequences(std::size_t vocab, std::size_t length);

/// With labels: log Z(X, y). Without: log Z(X) over every label sequence of
/// length 1..T' and every segmentation. Scores come from segment_score.
double brute_force_scrf(const Matrix& hidden, const ScrfParams& params, std::size_t max_len,
                        std::optional<std::span<const int>> labels = std::nullopt);

/// Highest-scoring (labels, segmentation) by exhaustive search, with the
/// same tie-breaking as the Viterbi decoder.
ScrfDecodeResult brute_force_scrf_argmax(const Matrix& hidden, const ScrfParams& params,
                                         std::size_t max_len);

/// log sum over all (|Y|+1)^T' frame paths that collapse to `labels`
/// (CTC ids, blank = 0). kLogZero when none does.
double brute_force_ctc(const FramePosteriors& posteriors, std::span<const int> labels);

/// Every frame path of length `frames` over `outputs` symbols.
std::vector<std::vector<int>> enumerate_paths(std::size_t frames, std::size_t outputs);

}  // namespace segctc::oracle
