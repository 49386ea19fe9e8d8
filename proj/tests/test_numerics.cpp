#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "segctc/numerics.hpp"
#include "support.hpp"

using namespace segctc;

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector<double>{kLogZero}) == kLogZero);
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{kLogZero, 3.5}) == 3.5);
  CHECK_THROWS_WITH_AS(log_sum_exp(std::vector<double>{}), doctest::Contains("empty reduction"), Error);

  SUBCASE("shift invariance") {
    const std::vector<double> t{-1.5, 0.25, 2.0, -7.0};
    for (double c : {-300.0, -1.0, 0.5, 700.0}) {
      std::vector<double> shifted = t;
      for (double& v : shifted) v += c;
      CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(t) + c)) < 1e-12 * std::max(1.0, std::abs(c)));
    }
  }
}

TEST_CASE("log_add") {
  CHECK(log_add(kLogZero, kLogZero) == kLogZero);
  CHECK(log_add(kLogZero, -2.0) == -2.0);
  CHECK(log_add(std::log(0.25), std::log(0.5)) == doctest::Approx(std::log(0.75)).epsilon(1e-15));
}

TEST_CASE("softmax") {
  auto p = softmax(std::vector<double>{0.0, 0.0});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);

  for (double c : {-50.0, 0.0, 3.0, 800.0}) {
    for (double v : softmax(std::vector<double>{c, c, c, c})) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }

  p = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));

  SUBCASE("shift invariance within 1e-12") {
    const std::vector<double> z{0.3, -1.2, 2.5};
    const auto base = softmax(z);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += 123.456;
    const auto moved = softmax(shifted);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(base[i] - moved[i]) < 1e-12);
  }

  SUBCASE("log_softmax agrees") {
    const std::vector<double> z{0.3, -1.2, 2.5};
    const auto p = softmax(z);
    const auto lp = log_softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::exp(lp[i]) == doctest::Approx(p[i]).epsilon(1e-14));
  }
}

TEST_CASE("finite_difference_gradient") {
  SUBCASE("theta squared at 3") {
    Matrix theta(1, 1, 3.0);
    const std::vector<TensorRef> refs{{"theta", &theta}};
    const auto g = finite_difference_gradient([&] { return theta[0] * theta[0]; }, refs, 1e-5);
    CHECK(std::abs(g[0][0] - 6.0) < 1e-6);
    CHECK(theta[0] == 3.0);  // restored
  }

  SUBCASE("constant loss") {
    Matrix a = test::random_normal(2, 3, 4);
    const std::vector<TensorRef> refs{{"a", &a}};
    const auto g = finite_difference_gradient([] { return 1.25; }, refs);
    for (double v : g[0].values()) CHECK(v == 0.0);
  }

  SUBCASE("non-finite loss names the entry") {
    Matrix a(2, 2, 1.0);
    const std::vector<TensorRef> refs{{"weights", &a}};
    CHECK_THROWS_WITH_AS(finite_difference_gradient([&] { return a(1, 0) > 1.0 ? std::log(-1.0) : 0.0; }, refs),
                         doctest::Contains("weights[1,0]"), Error);
  }
}

TEST_CASE("relative_error") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 1e-3) == doctest::Approx(1e-3));
  CHECK(relative_error(100.0, 101.0) == doctest::Approx(1.0 / 201.0));
}

TEST_CASE("seeded_init") {
  CHECK(seeded_init(3, 5, 42, "uniform-scaled") == seeded_init(3, 5, 42, "uniform-scaled"));
  CHECK_FALSE(seeded_init(3, 5, 42, "uniform-scaled") == seeded_init(3, 5, 43, "uniform-scaled"));

  const Matrix zeros = seeded_init(4, 7, 9, "zeros");
  for (double v : zeros.values()) CHECK(v == 0.0);

  const double bound = std::sqrt(6.0 / 8.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Matrix m = seeded_init(4, 4, seed, InitScheme::kUniformScaled);
    for (double v : m.values()) {
      CHECK(std::abs(v) <= bound);
    }
  }
  CHECK_THROWS_AS(parse_init_scheme("gaussian"), Error);
}

TEST_CASE("Rng") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  // std::mt19937_64 with the default seed: the 10000th output is fixed by the standard
  Rng standard(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = standard.next();
  CHECK(v == 9981545732273789042ull);

  Rng u(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  std::vector<int> items{0, 1, 2, 3, 4, 5, 6, 7};
  Rng s(11);
  s.shuffle(items);
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("Matrix") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), Error);
  Matrix m(2, 3);
  m(1, 2) = 4.0;
  CHECK(m[5] == 4.0);
  CHECK(m.row(1)[2] == 4.0);
  Matrix n(2, 3, 1.0);
  m.add_scaled(n, 2.0);
  CHECK(m(0, 0) == 2.0);
  CHECK(m(1, 2) == 6.0);
  CHECK(m.squared_norm() == doctest::Approx(5 * 4.0 + 36.0));

  const Matrix a(2, 2, std::vector<double>{1, 2, 3, 4});
  std::vector<double> y(2, 0.0);
  gemv_add(a, std::vector<double>{1.0, -1.0}, y);
  CHECK(y == std::vector<double>{-1.0, -1.0});
  std::vector<double> z(2, 0.0);
  gemv_t_add(a, std::vector<double>{1.0, -1.0}, z);
  CHECK(z == std::vector<double>{-2.0, -2.0});
}
