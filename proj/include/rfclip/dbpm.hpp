// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace rfclip {

/// Per-batch record of unweighted contrastive losses, one cell per
/// (batch_id, epoch). Epochs are 1-based and each batch's row fills
/// contiguously; a cell is written exactly once.
class LossHistory {
 public:
  LossHistory() = default;
  explicit LossHistory(std::size_t num_batches) : rows_(num_batches) {}
  explicit LossHistory(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {}

  std::size_t num_batches() const noexcept { return rows_.size(); }
  /// Number of epochs recorded for `batch_id`.
  std::size_t recorded(std::size_t batch_id) const;
  std::optional<double> at(std::size_t batch_id, std::size_t epoch) const;

  void record(std::size_t batch_id, std::size_t epoch, double loss);

  /// S(i, e): mean of epochs 1..e-1 for batch i.
  double historical_mean(std::size_t batch_id, std::size_t epoch) const;

  const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  bool operator==(const LossHistory&) const = default;

 private:
  std::vector<std::vector<double>> rows_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double a = 0.0;  // mu - alpha * sigma
  double b = 0.0;  // mu + beta * sigma
  double alpha = 3.0;
  double beta = 3.0;
};

/// Gaussian fit over {S(i, e)}_i and the band [a, b] derived from it.
EpochStats epoch_stats(const LossHistory& h, std::size_t epoch, double alpha = 3.0,
                       double beta = 3.0);

enum class PairClass { kCorrect, kNoisy, kFaulty };

std::string_view pair_class_name(PairClass c);

struct PairVerdict {
  std::size_t batch_id = 0;
  PairClass classification = PairClass::kCorrect;
  double weight = 1.0;
  /// The Gaussian density exceeded 1 and was clamped.
  bool clamped = false;
};

/// Smallest weight ever assigned; keeps w strictly positive when the density
/// underflows or sigma is zero.
inline constexpr double kMinPairWeight = 1e-12;

/// Weight 1 inside [a, b]; otherwise min(1, N(value; mu, sigma)) floored at
/// kMinPairWeight, classified noisy below a and faulty above b.
PairVerdict pair_weight(double decision_value, const EpochStats& stats);

/// L2 = w · L1.
double weighted_loss(const PairVerdict& verdict, double l1);

/// Which quantity is compared with [a, b]: the batch's loss in the current
/// epoch, or its historical mean S(i, e).
enum class DecisionVariable { kCurrentLoss, kHistoricalMean };

std::string_view decision_variable_name(DecisionVariable d);
DecisionVariable parse_decision_variable(std::string_view name);

}  // namespace rfclip
