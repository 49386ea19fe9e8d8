#include <doctest.h>

#include <cmath>

#include "segctc/oracle.hpp"
#include "segctc/scrf.hpp"
#include "support.hpp"

using namespace segctc;

namespace {

// Hand-written T'=3, |Y|=2 instance. Expected values below were computed
// from the same numbers by a separate numpy script that evaluates the
// feature function directly and enumerates all (y, E) pairs.
ScrfParams fixed_params() {
  ScrfParams p;
  p.label_embedding = Matrix(2, 2, {0.1, -0.3, 0.4, 0.2});
  p.label_weights = Matrix(3, 2, {0.5, -0.2, 0.1, 0.3, -0.4, 0.6});
  p.segment_weights = Matrix(3, 4, {0.2, -0.1, 0.3, 0.05, -0.3, 0.4, 0.1, -0.2, 0.15, 0.25, -0.35, 0.1});
  p.bias = Matrix(3, 1, {0.05, -0.1, 0.2});
  p.output_weights = Matrix(3, 1, {0.7, -0.5, 0.9});
  return p;
}

Matrix fixed_hidden() { return Matrix(3, 2, {1.0, 0.0, 0.5, -0.5, 0.0, 2.0}); }

ScrfParams random_params(std::size_t vocab, std::size_t state_dim, std::uint64_t seed, std::size_t extra = 0) {
  ScrfParams p = init_scrf(vocab, state_dim, 3, 4, extra, seed);
  std::vector<TensorRef> refs;
  collect_tensors(p, refs);
  Rng rng(seed + 1000);
  for (auto& t : refs) {
    for (double& v : t.value->values()) v += 0.5 * rng.normal();
  }
  return p;
}

}  // namespace

TEST_CASE("label_embedding") {
  const Matrix identity(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(label_embedding(2, identity) == std::vector<double>{0, 0, 1});
  for (int y = 0; y < 3; ++y) CHECK(label_embedding(y, Matrix(3, 2)) == std::vector<double>{0, 0});
  CHECK(label_embedding(0, Matrix(2, 2, {0.1, -0.3, 5, 5})) == std::vector<double>{0.1, -0.3});
  CHECK_THROWS_AS(label_embedding(3, identity), Error);
}

TEST_CASE("segment_embedding") {
  const Matrix h(3, 2, {1, 0, 7, 7, 0, 2});
  CHECK(segment_embedding(h, 1, 1) == std::vector<double>{7, 7, 7, 7});
  CHECK(segment_embedding(h, 0, 2) == std::vector<double>{1, 0, 0, 2});
  CHECK_THROWS_AS(segment_embedding(h, 2, 1), Error);
  CHECK_THROWS_AS(segment_embedding(h, 0, 3), Error);
}

TEST_CASE("segment_score") {
  const Matrix h = fixed_hidden();
  ScrfParams p = fixed_params();
  CHECK(segment_score(1, 0, 2, h, p) == doctest::Approx(1.054096206851442).epsilon(1e-13));
  CHECK(segment_score(0, 1, 1, h, p) == doctest::Approx(0.20994044873642984).epsilon(1e-13));
  p.activation = Activation::kSigmoid;
  CHECK(segment_score(1, 0, 2, h, p) == doctest::Approx(0.83378424523357).epsilon(1e-13));

  SUBCASE("zero output weights") {
    ScrfParams z = fixed_params();
    z.output_weights.fill(0.0);
    for (std::size_t e = 0; e < 3; ++e) CHECK(segment_score(1, 0, e, h, z) == 0.0);
  }
  SUBCASE("zero projections under tanh") {
    ScrfParams z = fixed_params();
    z.label_weights.fill(0.0);
    z.segment_weights.fill(0.0);
    z.bias.fill(0.0);
    CHECK(segment_score(0, 0, 2, h, z) == 0.0);
  }
  SUBCASE("table agrees with straight-line evaluation") {
    const Matrix hr = test::random_normal(6, 4, 3);
    const ScrfParams pr = random_params(3, 4, 8, 1);
    const auto table = build_score_table(hr, pr, 4);
    for (std::size_t e = 0; e < 6; ++e) {
      for (std::size_t d = 1; d <= std::min<std::size_t>(4, e + 1); ++d) {
        for (int y = 0; y < 3; ++y) {
          CHECK(table.at(y, e, d) == doctest::Approx(segment_score(y, e + 1 - d, e, hr, pr)).epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("scrf_log_numerator") {
  const Matrix h = fixed_hidden();
  const ScrfParams p = fixed_params();
  const LabelSequence y{1, 0};
  CHECK(scrf_log_numerator(h, y, p, 3) == doctest::Approx(1.8047340425313754).epsilon(1e-13));

  const Matrix h1 = test::random_normal(1, 2, 4);
  CHECK(scrf_log_numerator(h1, LabelSequence{1}, p, 1) == segment_score(1, 0, 0, h1, p));

  const Matrix h4 = test::random_normal(4, 2, 5);
  CHECK(scrf_log_numerator(h4, LabelSequence{0}, p, 2) == kLogZero);

  CHECK_THROWS_WITH_AS(scrf_log_numerator(h, LabelSequence{}, p, 3), doctest::Contains("empty label"), Error);
  CHECK_THROWS_AS(scrf_log_numerator(h, LabelSequence{0, 1, 0, 1}, p, 3), Error);
  CHECK_THROWS_AS(scrf_log_numerator(h, LabelSequence{2}, p, 3), Error);
}

TEST_CASE("scrf_log_partition") {
  const ScrfParams p = fixed_params();
  CHECK(scrf_log_partition(fixed_hidden(), p, 3) == doctest::Approx(4.028341591298483).epsilon(1e-13));

  const Matrix h1 = test::random_normal(1, 2, 6);
  const double f0 = segment_score(0, 0, 0, h1, p), f1 = segment_score(1, 0, 0, h1, p);
  CHECK(scrf_log_partition(h1, p, 1) == doctest::Approx(std::log(std::exp(f0) + std::exp(f1))).epsilon(1e-14));

  // all scores zero: 2*1 + 4*2 + 8*1 labelled segmentations
  ScrfParams z = fixed_params();
  z.output_weights.fill(0.0);
  CHECK(scrf_log_partition(fixed_hidden(), z, 3) == doctest::Approx(std::log(18.0)).epsilon(1e-14));
}

TEST_CASE("scrf_loss") {
  SUBCASE("fixed instance") {
    const auto l = scrf_loss(fixed_hidden(), LabelSequence{1, 0}, fixed_params(), 3);
    CHECK(l.loss == doctest::Approx(2.2236075487671076).epsilon(1e-13));
    CHECK(l.log_partition - l.log_numerator == doctest::Approx(l.loss).epsilon(1e-15));
  }

  SUBCASE("single frame is a two-way softmax") {
    const Matrix h1 = test::random_normal(1, 2, 9);
    const ScrfParams p = fixed_params();
    const double f0 = segment_score(0, 0, 0, h1, p), f1 = segment_score(1, 0, 0, h1, p);
    const double expected = -std::log(std::exp(f1) / (std::exp(f0) + std::exp(f1)));
    CHECK(scrf_loss(h1, LabelSequence{1}, p, 1).loss == doctest::Approx(expected).epsilon(1e-13));
  }

  SUBCASE("unreachable labels") {
    CHECK_THROWS_WITH_AS(scrf_loss(test::random_normal(5, 2, 1), LabelSequence{0, 1}, fixed_params(), 2),
                         doctest::Contains("unreachable"), Error);
  }

  SUBCASE("probabilities over reachable sequences sum to one") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const std::size_t frames = 1 + seed % 5, max_len = 1 + seed % frames;
      const Matrix h = test::random_normal(frames, 2, seed);
      const ScrfParams p = random_params(3, 2, seed);
      double total = 0.0;
      for (std::size_t j = 1; j <= frames; ++j) {
        if (j * max_len < frames) continue;
        for (const auto& y : oracle::enumerate_label_sequences(3, j)) total += std::exp(-scrf_loss(h, y, p, max_len, false).loss);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }

  SUBCASE("numerator never exceeds partition") {
    const Matrix h = test::random_normal(5, 2, 2);
    const ScrfParams p = random_params(2, 2, 3);
    for (const auto& y : oracle::enumerate_label_sequences(2, 3)) {
      CHECK(scrf_log_numerator(h, y, p, 3) <= scrf_log_partition(h, p, 3));
    }
  }
}

TEST_CASE("scrf gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    CAPTURE(seed);
    const std::size_t frames = 1 + seed % 4;
    const std::size_t state = 1 + seed % 4;
    Matrix h = test::random_normal(frames, state, seed);
    ScrfParams p = random_params(1 + seed % 3, state, seed, seed % 2);
    if (seed % 3 == 0) p.activation = Activation::kSigmoid;
    LabelSequence y(1 + seed % frames);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = static_cast<int>((seed + j) % p.vocab_size());
    const std::size_t max_len = frames;

    const auto l = scrf_loss(h, y, p, max_len);
    ScrfParams g = l.grad;
    std::vector<TensorRef> refs, analytic;
    collect_tensors(p, refs);
    collect_tensors(g, analytic);
    refs.push_back({"hidden", &h});
    Matrix gh = l.grad_hidden;
    analytic.push_back({"hidden", &gh});

    const auto numeric = finite_difference_gradient([&] { return scrf_loss(h, y, p, max_len, false).loss; }, refs);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      CAPTURE(refs[k].name);
      for (std::size_t i = 0; i < numeric[k].size(); ++i) {
        CHECK(relative_error((*analytic[k].value)[i], numeric[k][i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("scrf_viterbi_decode") {
  SUBCASE("fixed instance") {
    const auto best = scrf_viterbi_decode(fixed_hidden(), fixed_params(), 3);
    CHECK(best.labels == LabelSequence{1, 1});
    CHECK(best.segmentation == Segmentation{{0, 0}, {1, 2}});
    CHECK(best.score == doctest::Approx(1.3792074424121137).epsilon(1e-13));
  }

  SUBCASE("single frame picks the best label") {
    const Matrix h1 = test::random_normal(1, 2, 12);
    const ScrfParams p = fixed_params();
    const int expected = segment_score(0, 0, 0, h1, p) >= segment_score(1, 0, 0, h1, p) ? 0 : 1;
    const auto best = scrf_viterbi_decode(h1, p, 4);
    CHECK(best.labels == LabelSequence{expected});
    CHECK(best.segmentation == Segmentation{{0, 0}});
  }

  SUBCASE("T'=4 agrees with exhaustive argmax") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Matrix h = test::random_normal(4, 2, seed);
      const ScrfParams p = random_params(2, 2, seed + 50);
      const auto dp = scrf_viterbi_decode(h, p, 3);
      const auto brute = oracle::brute_force_scrf_argmax(h, p, 3);
      CHECK(dp.labels == brute.labels);
      CHECK(dp.segmentation == brute.segmentation);
      CHECK(dp.score == doctest::Approx(brute.score).epsilon(1e-12));
      CHECK(dp.score <= scrf_log_partition(h, p, 3));
    }
  }

  SUBCASE("invariant under positive scaling of w") {
    const Matrix h = test::random_normal(6, 3, 1);
    ScrfParams p = random_params(3, 3, 2);
    const auto before = scrf_viterbi_decode(h, p, 4);
    for (double& v : p.output_weights.values()) v *= 3.7;
    const auto after = scrf_viterbi_decode(h, p, 4);
    CHECK(before.labels == after.labels);
    CHECK(before.segmentation == after.segmentation);
  }

  SUBCASE("ties prefer the smaller label, then the shorter final segment") {
    ScrfParams z = fixed_params();
    z.output_weights.fill(0.0);
    const auto best = scrf_viterbi_decode(test::random_normal(3, 2, 1), z, 3);
    CHECK(best.score == 0.0);
    for (int y : best.labels) CHECK(y == 0);
    CHECK(best.segmentation.back().length() == 1);
  }
}

TEST_CASE("score table guards") {
  CHECK_THROWS_AS(SegmentScoreTable(3, 0, 2), Error);
  CHECK_THROWS_AS(build_score_table(test::random_normal(3, 3, 1), fixed_params(), 2), Error);
  CHECK(parse_activation("tanh") == Activation::kTanh);
  CHECK(parse_activation("sigmoid") == Activation::kSigmoid);
  CHECK_THROWS_AS(parse_activation("relu"), Error);
}
