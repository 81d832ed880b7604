// SPDX-License-Identifier: Apache-2.0
#include "rfclip/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rfclip/error.hpp"

namespace rfclip {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kShape: return "shape";
    case Errc::kDegenerateRow: return "degenerate-row";
    case Errc::kEmptyInput: return "empty-input";
    case Errc::kConfig: return "config";
    case Errc::kCorruptionInfeasible: return "corruption-infeasible";
    case Errc::kParse: return "parse";
    case Errc::kSchema: return "schema";
    case Errc::kUniqueness: return "uniqueness";
    case Errc::kInfeasiblePlan: return "infeasible-plan";
    case Errc::kDiverged: return "diverged";
    case Errc::kBatchTooSmall: return "batch-too-small";
    case Errc::kNumeric: return "numeric";
    case Errc::kDuplicateRecord: return "duplicate-record";
    case Errc::kNoHistory: return "no-history";
    case Errc::kIncompleteHistory: return "incomplete-history";
    case Errc::kUndefinedAuc: return "undefined-auc";
    case Errc::kMetric: return "metric";
    case Errc::kPrototype: return "prototype";
    case Errc::kVersion: return "version";
    case Errc::kIntegrity: return "integrity";
    case Errc::kIo: return "io";
  }
  return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(Errc::kShape, "matrix data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(Errc::kShape, "ragged rows in Matrix::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

namespace {

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) {
    throw Error(Errc::kNumeric, std::string(op) + " produced a non-finite entry");
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(Errc::kShape,
                "matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  }
  require_finite(out, "matmul");
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(Errc::kShape, "matmul_transposed shape mismatch: " + a.shape_string() +
                                  " x (" + b.shape_string() + ")^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a(i, p) * b(j, p);
      out(i, j) = acc;
    }
  }
  require_finite(out, "matmul_transposed");
  return out;
}

Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(Errc::kShape, "transposed_matmul shape mismatch: (" + a.shape_string() +
                                  ")^T x " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) acc += a(p, i) * b(p, j);
      out(i, j) = acc;
    }
  }
  require_finite(out, "transposed_matmul");
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    // Scale by the largest magnitude so tiny or huge rows neither underflow
    // nor overflow when squared.
    double scale = 0.0;
    for (double x : m.row(i)) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) {
      norms[i] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (double x : m.row(i)) {
      const double y = x / scale;
      acc += y * y;
    }
    norms[i] = scale * std::sqrt(acc);
  }
  return norms;
}

Matrix row_l2_normalize(const Matrix& m) {
  const auto norms = row_norms(m);
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (!(norms[i] >= 1e-30)) {
      throw Error(Errc::kDegenerateRow,
                  "row " + std::to_string(i) + " has norm below 1e-30", i);
    }
    for (double& x : out.row(i)) x /= norms[i];
  }
  return out;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::kEmptyInput, "logsumexp of an empty sequence");
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

MeanStd mean_std_population(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::kEmptyInput, "mean/std of an empty sequence");
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) {
    word = splitmix64(x);
    x += 0x9E3779B97F4A7C15ULL;
  }
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ (stream * 0xD1B54A32D192ED03ULL)));
}

}  // namespace rfclip
