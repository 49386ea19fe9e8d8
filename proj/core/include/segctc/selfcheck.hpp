#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace segctc {

enum class SelfCheckScale { kSmall, kFull };

SelfCheckScale parse_selfcheck_scale(std::string_view name);

/// Deliberate corruption of one dynamic program's input, used to confirm
/// that the suite catches and names a broken computation.
enum class Fault { kNone, kScrfPartition, kScrfNumerator, kCtcForward };

Fault parse_fault(std::string_view name);
std::string_view fault_name(Fault fault);

struct SelfCheckOptions {
  SelfCheckScale scale = SelfCheckScale::kSmall;
  std::uint64_t seed = 1;
  Fault fault = Fault::kNone;
};

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_error <= tolerance; }
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;

  bool passed() const;
};

// Individual checks. `instances` random problems are drawn from `seed`.
CheckResult check_scrf_numerator(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                 std::size_t max_vocab, Fault fault = Fault::kNone);
CheckResult check_scrf_partition(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                 std::size_t max_vocab, Fault fault = Fault::kNone);
CheckResult check_scrf_viterbi(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                               std::size_t max_vocab);
CheckResult check_ctc_forward(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                              std::size_t max_vocab, Fault fault = Fault::kNone);
/// |sum_y P(y | X) - 1| over every label sequence, by the dynamic programs.
CheckResult check_scrf_normalization(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                     std::size_t max_vocab);
CheckResult check_ctc_normalization(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                    std::size_t max_vocab);
/// Analytic against central-difference gradients, as max relative error.
CheckResult check_scrf_gradient(std::size_t instances, std::uint64_t seed);
CheckResult check_ctc_gradient(std::size_t instances, std::uint64_t seed);
CheckResult check_encoder_gradient(std::size_t instances, std::uint64_t seed);
CheckResult check_joint_gradient(double lambda, std::size_t instances, std::uint64_t seed);

SelfCheckReport run_selfcheck(const SelfCheckOptions& options);

/// One line per check: name, instance count, max error, tolerance, verdict.
void print_report(const SelfCheckReport& report, std::ostream& os);

}  // namespace segctc
