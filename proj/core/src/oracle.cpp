#include "segctc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace segctc::oracle {
namespace {

void extend(std::size_t frames, std::size_t segments, std::size_t max_len, Segmentation& prefix,
            std::size_t next, std::vector<Segmentation>& out) {
  if (prefix.size() == segments) {
    if (next == frames) out.push_back(prefix);
    return;
  }
  for (std::size_t d = 1; d <= max_len && next + d <= frames; ++d) {
    prefix.push_back({next, next + d - 1});
    extend(frames, segments, max_len, prefix, next + d, out);
    prefix.pop_back();
  }
}

// f(y, s, n) through the straight-line formula, memoized per instance.
class ScoreCache {
 public:
  ScoreCache(const Matrix& hidden, const ScrfParams& params)
      : hidden_(hidden),
        params_(params),
        frames_(hidden.rows()),
        cache_(params.vocab_size() * frames_ * frames_, std::numeric_limits<double>::quiet_NaN()) {}

  double operator()(int y, const Segment& seg) {
    double& v = cache_[(static_cast<std::size_t>(y) * frames_ + seg.start) * frames_ + seg.end];
    if (std::isnan(v)) v = segment_score(y, seg.start, seg.end, hidden_, params_);
    return v;
  }

 private:
  const Matrix& hidden_;
  const ScrfParams& params_;
  std::size_t frames_;
  std::vector<double> cache_;
};

double path_score(ScoreCache& score, std::span<const int> labels, const Segmentation& seg) {
  double s = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) s += score(labels[j], seg[j]);
  return s;
}

}  // namespace

std::vector<Segmentation> enumerate_segmentations(std::size_t frames, std::size_t segments,
                                                  std::size_t max_len) {
  std::vector<Segmentation> out;
  if (frames == 0 || segments == 0 || max_len == 0) return out;
  Segmentation prefix;
  extend(frames, segments, max_len, prefix, 0, out);
  return out;
}

std::size_t count_segmentations(std::size_t frames, std::size_t segments, std::size_t max_len) {
  // c[j][t]: covers of t frames by j segments
  std::vector<std::vector<std::size_t>> c(segments + 1, std::vector<std::size_t>(frames + 1, 0));
  c[0][0] = 1;
  for (std::size_t j = 1; j <= segments; ++j) {
    for (std::size_t t = 1; t <= frames; ++t) {
      for (std::size_t d = 1; d <= std::min(max_len, t); ++d) c[j][t] += c[j - 1][t - d];
    }
  }
  return c[segments][frames];
}

std::vector<LabelSequence> enumerate_label_sequences(std::size_t vocab, std::size_t length) {
  std::vector<LabelSequence> out;
  LabelSequence cur(length, 0);
  if (vocab == 0) return out;
  while (true) {
    out.push_back(cur);
    std::size_t i = length;
    while (i > 0) {
      --i;
      if (static_cast<std::size_t>(++cur[i]) < vocab) break;
      cur[i] = 0;
      if (i == 0) return out;
    }
    if (length == 0) return out;
  }
}

double brute_force_scrf(const Matrix& hidden, const ScrfParams& params, std::size_t max_len,
                        std::optional<std::span<const int>> labels) {
  const std::size_t frames = hidden.rows();
  if (frames > kMaxScrfFrames || params.vocab_size() > kMaxScrfVocab) {
    throw Error("brute_force_scrf: instance exceeds guard (T' <= 8, |Y| <= 4)");
  }
  ScoreCache score(hidden, params);
  std::vector<double> terms;
  if (labels) {
    for (const auto& seg : enumerate_segmentations(frames, labels->size(), max_len)) {
      terms.push_back(path_score(score, *labels, seg));
    }
  } else {
    for (std::size_t j = 1; j <= frames; ++j) {
      const auto segs = enumerate_segmentations(frames, j, max_len);
      if (segs.empty()) continue;
      for (const auto& y : enumerate_label_sequences(params.vocab_size(), j)) {
        for (const auto& seg : segs) terms.push_back(path_score(score, y, seg));
      }
    }
  }
  return terms.empty() ? kLogZero : log_sum_exp(terms);
}

ScrfDecodeResult brute_force_scrf_argmax(const Matrix& hidden, const ScrfParams& params,
                                         std::size_t max_len) {
  const std::size_t frames = hidden.rows();
  if (frames > kMaxScrfFrames || params.vocab_size() > kMaxScrfVocab) {
    throw Error("brute_force_scrf_argmax: instance exceeds guard (T' <= 8, |Y| <= 4)");
  }
  ScoreCache score(hidden, params);
  ScrfDecodeResult best;
  bool have = false;
  for (std::size_t j = 1; j <= frames; ++j) {
    const auto segs = enumerate_segmentations(frames, j, max_len);
    for (const auto& y : enumerate_label_sequences(params.vocab_size(), j)) {
      for (const auto& seg : segs) {
        const double s = path_score(score, y, seg);
        if (!have || s > best.score) {
          best = {y, seg, s};
          have = true;
        }
      }
    }
  }
  return best;
}

std::vector<std::vector<int>> enumerate_paths(std::size_t frames, std::size_t outputs) {
  std::vector<std::vector<int>> out;
  for (auto& seq : enumerate_label_sequences(outputs, frames)) out.push_back(std::move(seq));
  return out;
}

double brute_force_ctc(const FramePosteriors& posteriors, std::span<const int> labels) {
  const std::size_t frames = posteriors.frames();
  if (frames > kMaxCtcFrames || posteriors.num_outputs() > kMaxCtcLabels + 1) {
    throw Error("brute_force_ctc: instance exceeds guard (T' <= 8, |Y| <= 3)");
  }
  const LabelSequence target(labels.begin(), labels.end());
  std::vector<double> terms;
  for (const auto& path : enumerate_paths(frames, posteriors.num_outputs())) {
    if (collapse(path) != target) continue;
    double s = 0.0;
    for (std::size_t t = 0; t < frames; ++t) s += posteriors.log_probs(t, static_cast<std::size_t>(path[t]));
    terms.push_back(s);
  }
  return terms.empty() ? kLogZero : log_sum_exp(terms);
}

}  // namespace segctc::oracle
