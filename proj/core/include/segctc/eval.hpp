#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "segctc/data.hpp"

namespace segctc {

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  ErrorCounts& operator+=(const ErrorCounts& o);
  bool operator==(const ErrorCounts&) const = default;
};

/// Unit-cost Levenshtein alignment. Among optimal alignments the backtrace
/// takes a substitution (or match) before a deletion, before an insertion.
ErrorCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);
ErrorCounts edit_distance(std::span<const int> ref, std::span<const int> hyp);

struct CorpusScore {
  ErrorCounts total;
  std::vector<std::pair<std::string, ErrorCounts>> utterances;

  /// 100 * (S + I + D) / N, pooled over the corpus.
  double per() const;
};

/// Maps and merges both sides, then pools counts. `refs` and `hyps` must
/// cover the same ids; hypotheses are matched by id.
CorpusScore score_corpus(const std::vector<Transcript>& refs, const std::vector<Transcript>& hyps,
                         const PhoneMapping& mapping);
double corpus_per(const std::vector<Transcript>& refs, const std::vector<Transcript>& hyps,
                  const PhoneMapping& mapping);

enum class Phase { kPretrain, kJoint };

std::string_view phase_name(Phase p);
Phase parse_phase(std::string_view name);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_ctc = 0.0;
  double loss_scrf = 0.0;
  double valid_per = 0.0;
  Phase phase = Phase::kJoint;

  bool operator==(const EpochRecord&) const = default;
};

struct ConvergenceLog {
  std::vector<EpochRecord> records;

  bool operator==(const ConvergenceLog&) const = default;
};

inline constexpr std::string_view kConvergenceHeader =
    "epoch,lr,loss_total,loss_ctc,loss_scrf,valid_per,phase";

/// Header plus one row per epoch; reals in shortest round-trip form.
std::string format_convergence_csv(const ConvergenceLog& log);
void emit_convergence_csv(const ConvergenceLog& log, const std::filesystem::path& path);
ConvergenceLog read_convergence_csv(const std::filesystem::path& path);

/// PER with one decimal, as printed by the CLI.
std::string format_per(double per);

}  // namespace segctc
