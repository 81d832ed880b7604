// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rfclip {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  std::string shape_string() const;
  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a · b. Summation runs left to right over the inner index.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix transposed_matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

std::vector<double> row_norms(const Matrix& m);
Matrix row_l2_normalize(const Matrix& m);

double logsumexp(std::span<const double> v);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population (divide-by-N) standard deviation.
MeanStd mean_std_population(std::span<const double> v);

double sigmoid(double x);

/// Seeded pseudo-random generator: xoshiro256** with its 256-bit state
/// expanded from the 64-bit seed as s[i] = splitmix64(seed + i * 0x9E3779B97F4A7C15).
///
/// The stream is part of the external interface (synthetic datasets must
/// reproduce across implementations), so the algorithm is fixed:
///   splitmix64(x): z = x + 0x9E3779B97F4A7C15;
///               z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
///               z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
///               return z ^ (z >> 31)
///   below(n):   rejection of the top partial bucket, then x % n
///   uniform():  (next_u64() >> 11) * 2^-53, in [0, 1)
///   normal():   Box-Muller on two uniforms u1, u2 with u1 mapped to (0, 1];
///               returns sqrt(-2 ln u1) cos(2π u2); the sine half is discarded
///   fork(k):    new Rng seeded with splitmix64(seed ^ (k * 0xD1B54A32D192ED03))
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n) by rejection sampling; n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace rfclip
