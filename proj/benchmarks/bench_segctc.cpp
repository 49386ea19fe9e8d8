#include <benchmark/benchmark.h>

#include "segctc/ctc.hpp"
#include "segctc/encoder.hpp"
#include "segctc/joint.hpp"
#include "segctc/scrf.hpp"

using namespace segctc;

namespace {

Matrix normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// labels alternate so CTC never needs extra blanks
LabelSequence alternating(std::size_t n, int first, int second) {
  LabelSequence y(n);
  for (std::size_t j = 0; j < n; ++j) y[j] = j % 2 ? second : first;
  return y;
}

}  // namespace

// range(0): frames T', range(1): max segment length L
static void BM_ScrfPartition(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto max_len = static_cast<std::size_t>(state.range(1));
  const Matrix h = normal(frames, 32, 1);
  const ScrfParams p = init_scrf(40, 32, 16, 32, 0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(scrf_log_partition(h, p, max_len));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_ScrfPartition)->Args({50, 8})->Args({100, 8})->Args({200, 8})->Args({100, 16})->Unit(benchmark::kMillisecond);

static void BM_ScrfLossAndGradient(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const Matrix h = normal(frames, 32, 3);
  const ScrfParams p = init_scrf(40, 32, 16, 32, 0, 4);
  const LabelSequence y = alternating(frames / 4, 3, 7);
  for (auto _ : state) benchmark::DoNotOptimize(scrf_loss(h, y, p, 8).loss);
}
BENCHMARK(BM_ScrfLossAndGradient)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_CtcLoss(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto post = posteriors_from_logits(normal(frames, 41, 5));
  const LabelSequence y = alternating(frames / 4, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(post, y).loss);
}
BENCHMARK(BM_CtcLoss)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

// range(0): raw frames; three layers with two subsampling steps
static void BM_EncoderForward(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const Matrix x = normal(frames, 40, 6);
  const EncoderParams enc = init_encoder(40, 64, 3, {2, 2}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(encode(x, enc));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_EncoderForward)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
