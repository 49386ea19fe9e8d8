#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace segctc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sequence of label ids. Vocabulary ids are 0..|Y|-1; CTC ids shift them
/// by one so that 0 is the blank.
using LabelSequence = std::vector<int>;

/// Log-domain probability zero.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Dense row-major matrix of doubles. Vectors are stored as n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  /// this += scale * other; shapes must match.
  void add_scaled(const Matrix& other, double scale);
  double squared_norm() const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y += A x, with A of shape (y.size() x x.size()).
void gemv_add(const Matrix& a, std::span<const double> x, std::span<double> y);
/// y += A^T x, with A of shape (x.size() x y.size()).
void gemv_t_add(const Matrix& a, std::span<const double> x, std::span<double> y);
/// A += scale * u v^T.
void outer_add(Matrix& a, std::span<const double> u, std::span<const double> v, double scale = 1.0);
double dot(std::span<const double> a, std::span<const double> b);

/// log(exp(a) + exp(b)) without overflow; either side may be kLogZero.
double log_add(double a, double b);

/// log sum exp(terms), max-shifted. Throws Error("empty reduction") on empty input.
double log_sum_exp(std::span<const double> terms);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// Portable seeded generator.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Conversions to doubles, normals and shuffles are done here
/// rather than through <random> distributions (whose algorithms are
/// implementation-defined), so a given seed produces the same integers,
/// uniforms and permutations on every conforming platform (normals also go
/// through libm log/cos):
///   uniform()  = (next() >> 11) * 2^-53
///   normal()   = Box-Muller on two uniform() draws, cosine branch only
///   shuffle()  = Fisher-Yates from the back, index = below(i + 1)
///   below(n)   = next() % n
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Combine two values into a derived seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

enum class InitScheme { kZeros, kUniformScaled };

/// Accepts "zeros" and "uniform-scaled".
InitScheme parse_init_scheme(std::string_view name);

/// Deterministic initialization. kUniformScaled draws from
/// U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, InitScheme scheme);
Matrix seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed, std::string_view scheme);

/// A named, mutable parameter tensor.
struct TensorRef {
  std::string name;
  Matrix* value;
};

/// Central differences of `loss` with respect to every scalar in `params`.
/// `loss` must read the tensors referenced by `params`; each entry is
/// perturbed in place and restored. Throws Error naming the parameter when
/// a perturbed loss is not finite.
std::vector<Matrix> finite_difference_gradient(const std::function<double()>& loss,
                                               std::span<const TensorRef> params,
                                               double epsilon = 1e-5);

/// |a - b| / max(1, |a| + |b|)
double relative_error(double a, double b);

}  // namespace segctc
