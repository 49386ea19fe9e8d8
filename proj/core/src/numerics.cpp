#include "segctc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace segctc {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::add_scaled(const Matrix& other, double scale) {
  if (!same_shape(other)) throw Error("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

double Matrix::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

void gemv_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void gemv_t_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * xr;
  }
}

void outer_add(Matrix& a, std::span<const double> u, std::span<const double> v, double scale) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double ur = scale * u[r];
    if (ur == 0.0) continue;
    auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ur * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) throw Error("empty reduction");
  const double m = *std::max_element(terms.begin(), terms.end());
  if (m == kLogZero) return kLogZero;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double z = log_sum_exp(logits);
  for (double& v : out) v -= z;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : out) v /= s;
  return out;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1]
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "zeros") return InitScheme::kZeros;
  if (name == "uniform-scaled") return InitScheme::kUniformScaled;
  throw Error("unknown init scheme '" + std::string(name) + "'");
}

Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, InitScheme scheme) {
  Matrix m(rows, cols);
  if (scheme == InitScheme::kZeros) return m;
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, std::string_view scheme) {
  return seeded_init(rows, cols, seed, parse_init_scheme(scheme));
}

std::vector<Matrix> finite_difference_gradient(const std::function<double()>& loss,
                                               std::span<const TensorRef> params,
                                               double epsilon) {
  if (!(epsilon > 0.0)) throw Error("finite_difference_gradient: epsilon must be positive");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    Matrix& m = *p.value;
    Matrix g(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double saved = m[i];
      m[i] = saved + epsilon;
      const double up = loss();
      m[i] = saved - epsilon;
      const double down = loss();
      m[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error("non-finite loss when perturbing " + p.name + "[" +
                    std::to_string(i / m.cols()) + "," + std::to_string(i % m.cols()) + "]");
      }
      g[i] = (up - down) / (2.0 * epsilon);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(a) + std::abs(b));
}

}  // namespace segctc
