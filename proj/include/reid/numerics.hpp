#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reid/errors.hpp"

namespace reid {

using Vector = std::vector<double>;

// Dense row-major matrix, 64-bit entries. Shapes are validated at the
// operation boundaries, not by construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

// Numerically stable logistic; saturates instead of overflowing.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.raw()) v = sigmoid(v);
  return out;
}

inline Matrix tanh(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.raw()) v = std::tanh(v);
  return out;
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.raw()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Deterministic seeded generator. Draws are produced from the raw 64-bit
// stream directly (no std::*_distribution) so the sequence is identical
// across standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(splitmix(seed)) {
    // Warm a second word for the xorshift-style mix.
    inc_ = splitmix(state_) | 1ULL;
  }

  std::uint64_t next() {
    // PCG-XSH-RR, 64 -> 32 output doubled; constants from the PCG paper.
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    std::uint32_t hi = (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    rot = static_cast<std::uint32_t>(old >> 59u);
    std::uint32_t lo = (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
  }

  // Uniform in [0, 1) with 53 significant bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [-bound, +bound].
  double uniform(double bound) { return (2.0 * unit() - 1.0) * bound; }

  // Standard normal via Box-Muller (deterministic, no library distribution).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = unit();
    double u2 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::swap(v[i], v[below(i + 1)]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::uint64_t state_;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Matrix uniform_init(SeededRng& rng, std::size_t rows, std::size_t cols,
                           double bound) {
  if (bound <= 0.0) {
    throw UsageError("uniform_init: bound must be positive, got " +
                     std::to_string(bound));
  }
  Matrix m(rows, cols);
  for (double& v : m.raw()) v = rng.uniform(bound);
  return m;
}

// Small vector helpers shared by the model code.
inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double distance(const Vector& s_p, const Vector& s_q) {
  if (s_p.size() != s_q.size()) {
    throw ShapeError("distance: lengths " + std::to_string(s_p.size()) + " and " +
                     std::to_string(s_q.size()) + " differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < s_p.size(); ++i) {
    const double diff = s_p[i] - s_q[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace reid
