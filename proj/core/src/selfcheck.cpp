#include "segctc/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "segctc/joint.hpp"
#include "segctc/oracle.hpp"

namespace segctc {
namespace {

constexpr double kOracleTolerance = 1e-10;
constexpr double kNormalizationTolerance = 1e-8;
constexpr double kGradientTolerance = 1e-4;

// Both -inf counts as agreement.
double log_domain_error(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a - b);
}

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

LabelSequence random_labels(Rng& rng, std::size_t length, std::size_t vocab, int offset = 0) {
  LabelSequence y(length);
  for (int& v : y) v = static_cast<int>(rng.below(vocab)) + offset;
  return y;
}

struct ScrfInstance {
  Matrix hidden;
  ScrfParams params;
  std::size_t max_len = 1;
  LabelSequence labels;
};

ScrfInstance random_scrf_instance(Rng& rng, std::size_t max_frames, std::size_t max_vocab) {
  ScrfInstance in;
  const std::size_t frames = draw(rng, 1, max_frames);
  const std::size_t vocab = draw(rng, 1, max_vocab);
  const std::size_t state_dim = draw(rng, 1, 3);
  in.max_len = draw(rng, 1, frames);
  in.hidden = random_normal(frames, state_dim, rng);
  const Activation act = rng.below(2) == 0 ? Activation::kTanh : Activation::kSigmoid;
  in.params = init_scrf(vocab, state_dim, draw(rng, 1, 3), draw(rng, 1, 4), rng.below(2), rng.next(), act);
  // widen the initial range so scores are not all near zero
  std::vector<TensorRef> refs;
  collect_tensors(in.params, refs);
  for (auto& t : refs) {
    for (double& v : t.value->values()) v += 0.5 * rng.normal();
  }
  in.labels = random_labels(rng, draw(rng, 1, frames), vocab);
  return in;
}

FramePosteriors random_posteriors(Rng& rng, std::size_t frames, std::size_t outputs) {
  return posteriors_from_logits(random_normal(frames, outputs, rng));
}

void corrupt(SegmentScoreTable& table) { table.at(0, table.frames() - 1, 1) += 1e-3; }

template <class F>
CheckResult run(std::string name, double tolerance, std::size_t instances, F&& error_of) {
  CheckResult r{std::move(name), instances, 0.0, tolerance};
  for (std::size_t i = 0; i < instances; ++i) r.max_error = std::max(r.max_error, error_of(i));
  return r;
}

// Max relative error between analytic gradients and central differences.
double gradient_error(const std::function<double()>& loss, std::span<const TensorRef> params,
                      const std::vector<const Matrix*>& analytic) {
  const auto numeric = finite_difference_gradient(loss, params);
  double worst = 0.0;
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    const auto a = analytic[k]->values();
    const auto n = numeric[k].values();
    for (std::size_t i = 0; i < n.size(); ++i) worst = std::max(worst, relative_error(a[i], n[i]));
  }
  return worst;
}

ModelConfig toy_model(Rng& rng) {
  ModelConfig c;
  c.input_dim = draw(rng, 2, 3);
  c.vocab_size = draw(rng, 2, 3);
  c.hidden_dim = draw(rng, 2, 4);
  c.layers = 2;
  c.subsample = {draw(rng, 1, 2)};
  c.label_dim = 2;
  c.feature_dim = 3;
  c.extra_feature_layers = rng.below(2);
  c.max_seg_len = 3;
  return c;
}

}  // namespace

SelfCheckScale parse_selfcheck_scale(std::string_view name) {
  if (name == "small") return SelfCheckScale::kSmall;
  if (name == "full") return SelfCheckScale::kFull;
  throw Error("unknown selfcheck scale '" + std::string(name) + "' (expected small or full)");
}

Fault parse_fault(std::string_view name) {
  for (Fault f : {Fault::kNone, Fault::kScrfPartition, Fault::kScrfNumerator, Fault::kCtcForward}) {
    if (fault_name(f) == name) return f;
  }
  throw Error("unknown fault '" + std::string(name) + "'");
}

std::string_view fault_name(Fault fault) {
  switch (fault) {
    case Fault::kNone: return "none";
    case Fault::kScrfPartition: return "scrf-partition";
    case Fault::kScrfNumerator: return "scrf-numerator";
    case Fault::kCtcForward: return "ctc-forward";
  }
  return "none";
}

bool SelfCheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

CheckResult check_scrf_numerator(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                 std::size_t max_vocab, Fault fault) {
  Rng rng(seed);
  return run("scrf-numerator-oracle", kOracleTolerance, instances, [&](std::size_t) {
    const auto in = random_scrf_instance(rng, max_frames, max_vocab);
    auto table = build_score_table(in.hidden, in.params, in.max_len);
    if (fault == Fault::kScrfNumerator) corrupt(table);
    const double dp = scrf_log_numerator(table, in.labels);
    const double brute = oracle::brute_force_scrf(in.hidden, in.params, in.max_len, std::span<const int>(in.labels));
    return log_domain_error(dp, brute);
  });
}

CheckResult check_scrf_partition(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                 std::size_t max_vocab, Fault fault) {
  Rng rng(seed);
  return run("scrf-partition-oracle", kOracleTolerance, instances, [&](std::size_t) {
    const auto in = random_scrf_instance(rng, max_frames, max_vocab);
    auto table = build_score_table(in.hidden, in.params, in.max_len);
    if (fault == Fault::kScrfPartition) corrupt(table);
    return log_domain_error(scrf_log_partition(table),
                            oracle::brute_force_scrf(in.hidden, in.params, in.max_len));
  });
}

CheckResult check_scrf_viterbi(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                               std::size_t max_vocab) {
  Rng rng(seed);
  return run("scrf-viterbi-oracle", kOracleTolerance, instances, [&](std::size_t) {
    const auto in = random_scrf_instance(rng, max_frames, max_vocab);
    const auto dp = scrf_viterbi_decode(in.hidden, in.params, in.max_len);
    const auto brute = oracle::brute_force_scrf_argmax(in.hidden, in.params, in.max_len);
    if (dp.labels != brute.labels || dp.segmentation != brute.segmentation) {
      return std::numeric_limits<double>::infinity();
    }
    return std::abs(dp.score - brute.score);
  });
}

CheckResult check_ctc_forward(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                              std::size_t max_vocab, Fault fault) {
  Rng rng(seed);
  return run("ctc-forward-oracle", kOracleTolerance, instances, [&](std::size_t) {
    const std::size_t frames = draw(rng, 1, max_frames);
    const std::size_t vocab = draw(rng, 1, max_vocab);
    auto post = random_posteriors(rng, frames, vocab + 1);
    // lengths past the alignable range exercise the -inf branch
    const auto labels = random_labels(rng, draw(rng, 0, frames), vocab, 1);
    const double brute = oracle::brute_force_ctc(post, labels);
    if (fault == Fault::kCtcForward) post.log_probs(frames - 1, kBlank) += 1e-3;
    return log_domain_error(ctc_log_likelihood(post, labels), brute);
  });
}

CheckResult check_scrf_normalization(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                     std::size_t max_vocab) {
  Rng rng(seed);
  return run("scrf-normalization", kNormalizationTolerance, instances, [&](std::size_t) {
    const auto in = random_scrf_instance(rng, max_frames, max_vocab);
    const auto table = build_score_table(in.hidden, in.params, in.max_len);
    const double log_z = scrf_log_partition(table);
    double total = 0.0;
    for (std::size_t j = 1; j <= table.frames(); ++j) {
      if (j * in.max_len < table.frames()) continue;
      for (const auto& y : oracle::enumerate_label_sequences(table.vocab(), j)) {
        total += std::exp(scrf_log_numerator(table, y) - log_z);
      }
    }
    return std::abs(total - 1.0);
  });
}

CheckResult check_ctc_normalization(std::size_t instances, std::uint64_t seed, std::size_t max_frames,
                                    std::size_t max_vocab) {
  Rng rng(seed);
  return run("ctc-normalization", kNormalizationTolerance, instances, [&](std::size_t) {
    const std::size_t frames = draw(rng, 1, max_frames);
    const std::size_t vocab = draw(rng, 1, max_vocab);
    const auto post = random_posteriors(rng, frames, vocab + 1);
    double total = 0.0;
    for (std::size_t j = 0; j <= frames; ++j) {
      for (auto y : oracle::enumerate_label_sequences(vocab, j)) {
        for (int& v : y) ++v;
        if (ctc_min_frames(y) <= frames) total += std::exp(ctc_log_likelihood(post, y));
      }
    }
    return std::abs(total - 1.0);
  });
}

CheckResult check_scrf_gradient(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  return run("scrf-gradient", kGradientTolerance, instances, [&](std::size_t) {
    auto in = random_scrf_instance(rng, 4, 3);
    in.max_len = in.hidden.rows();
    const auto loss = scrf_loss(in.hidden, in.labels, in.params, in.max_len);
    std::vector<TensorRef> refs;
    collect_tensors(in.params, refs);
    refs.push_back({"hidden", &in.hidden});
    ScrfParams grad = loss.grad;
    std::vector<TensorRef> grad_refs;
    collect_tensors(grad, grad_refs);
    std::vector<const Matrix*> analytic;
    for (const auto& g : grad_refs) analytic.push_back(g.value);
    analytic.push_back(&loss.grad_hidden);
    return gradient_error(
        [&] { return scrf_loss(in.hidden, in.labels, in.params, in.max_len, false).loss; }, refs, analytic);
  });
}

CheckResult check_ctc_gradient(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  return run("ctc-gradient", kGradientTolerance, instances, [&](std::size_t) {
    const std::size_t frames = draw(rng, 1, 5);
    const std::size_t vocab = draw(rng, 1, 3);
    const std::size_t state_dim = draw(rng, 1, 3);
    Matrix hidden = random_normal(frames, state_dim, rng);
    CtcHead head = init_ctc_head(vocab, state_dim, rng.next());
    LabelSequence labels;
    do {
      labels = random_labels(rng, draw(rng, 0, frames), vocab, 1);
    } while (ctc_min_frames(labels) > frames);

    const auto loss = ctc_loss(ctc_posteriors(hidden, head), labels);
    CtcHead grad = zeros_like(head);
    const Matrix d_hidden = ctc_head_backward(hidden, head, loss.grad_logits, grad);
    std::vector<TensorRef> refs;
    collect_tensors(head, refs);
    refs.push_back({"hidden", &hidden});
    return gradient_error([&] { return ctc_loss(ctc_posteriors(hidden, head), labels, false).loss; }, refs,
                          {&grad.weight, &grad.bias, &d_hidden});
  });
}

CheckResult check_encoder_gradient(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  return run("encoder-gradient", kGradientTolerance, instances, [&](std::size_t) {
    const std::size_t frames = draw(rng, 1, 6);
    const std::size_t input_dim = draw(rng, 1, 3);
    const std::size_t layers = draw(rng, 1, 3);
    std::vector<std::size_t> factors(layers - 1);
    for (auto& f : factors) f = draw(rng, 1, 2);
    EncoderParams params = init_encoder(input_dim, draw(rng, 1, 4), layers, factors, rng.next());
    const Matrix x = random_normal(frames, input_dim, rng);
    const Matrix probe = random_normal(params.output_length(frames), params.output_dim(), rng);
    const EncodeOptions options{0.2, true, rng.next()};

    // loss = sum(probe * encode(x)), so d loss / d output = probe
    auto loss = [&] {
      const Matrix h = encode(x, params, options);
      return dot(h.values(), probe.values());
    };
    EncoderTape tape;
    encode(x, params, options, &tape);
    EncoderParams grad = zeros_like(params);
    encode_backward(params, tape, probe, grad);
    std::vector<TensorRef> refs, grad_refs;
    collect_tensors(params, refs);
    collect_tensors(grad, grad_refs);
    std::vector<const Matrix*> analytic;
    for (const auto& g : grad_refs) analytic.push_back(g.value);
    return gradient_error(loss, refs, analytic);
  });
}

CheckResult check_joint_gradient(double lambda, std::size_t instances, std::uint64_t seed) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(lambda * 1000)));
  char name[40];
  std::snprintf(name, sizeof name, "joint-gradient-lambda-%g", lambda);
  return run(name, kGradientTolerance, instances, [&](std::size_t) {
    const ModelConfig config = toy_model(rng);
    ModelParams params = init_model(config, rng.next());
    const std::size_t frames = draw(rng, 2, 6);
    const Matrix x = random_normal(frames, config.input_dim, rng);
    const std::size_t out_frames = subsampled_length(frames, config.subsample);
    // no adjacent repeats, at least ceil(T'/L) labels: reachable by both heads
    LabelSequence labels(draw(rng, (out_frames + config.max_seg_len - 1) / config.max_seg_len, out_frames));
    for (std::size_t j = 0; j < labels.size(); ++j) {
      do {
        labels[j] = static_cast<int>(rng.below(config.vocab_size));
      } while (j > 0 && labels[j] == labels[j - 1]);
    }
    const EncodeOptions options{0.2, true, rng.next()};

    const auto loss = joint_loss(x, labels, params, lambda, config.max_seg_len, options);
    const auto grad_refs = collect_tensors(loss.grad);
    std::vector<const Matrix*> analytic;
    for (const auto& g : grad_refs) analytic.push_back(g.value);
    const auto refs = collect_tensors(params);
    return gradient_error(
        [&] { return joint_loss(x, labels, params, lambda, config.max_seg_len, options, false).loss; }, refs,
        analytic);
  });
}

SelfCheckReport run_selfcheck(const SelfCheckOptions& options) {
  const bool full = options.scale == SelfCheckScale::kFull;
  const std::size_t oracle_n = full ? 1000 : 200;
  const std::size_t grad_n = full ? 50 : 10;
  const std::size_t scrf_frames = full ? 8 : 6;
  const std::size_t ctc_frames = 8;
  const std::uint64_t s = options.seed;

  SelfCheckReport report;
  auto& c = report.checks;
  c.push_back(check_scrf_numerator(oracle_n, mix_seed(s, 1), scrf_frames, 3, options.fault));
  c.push_back(check_scrf_partition(oracle_n, mix_seed(s, 2), scrf_frames, 3, options.fault));
  c.push_back(check_scrf_viterbi(oracle_n, mix_seed(s, 3), scrf_frames, 3));
  c.push_back(check_ctc_forward(oracle_n, mix_seed(s, 4), ctc_frames, 3, options.fault));
  c.push_back(check_scrf_normalization(oracle_n, mix_seed(s, 5), scrf_frames, 3));
  c.push_back(check_ctc_normalization(oracle_n, mix_seed(s, 6), ctc_frames, 3));
  c.push_back(check_scrf_gradient(grad_n, mix_seed(s, 7)));
  c.push_back(check_ctc_gradient(grad_n, mix_seed(s, 8)));
  c.push_back(check_encoder_gradient(grad_n, mix_seed(s, 9)));
  for (double lambda : {0.0, 0.5, 1.0}) c.push_back(check_joint_gradient(lambda, grad_n, mix_seed(s, 10)));
  return report;
}

void print_report(const SelfCheckReport& report, std::ostream& os) {
  char line[160];
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "%-28s n=%-4zu max_err=%.3e tol=%.0e %s\n", c.name.c_str(), c.instances,
                  c.max_error, c.tolerance, c.passed() ? "PASS" : "FAIL");
    os << line;
  }
  os << (report.passed() ? "selfcheck: all checks passed\n" : "selfcheck: FAILED\n");
}

}  // namespace segctc
