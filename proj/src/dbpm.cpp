// SPDX-License-Identifier: Apache-2.0
#include "rfclip/dbpm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rfclip/error.hpp"
#include "rfclip/numkit.hpp"

namespace rfclip {

std::size_t LossHistory::recorded(std::size_t batch_id) const {
  if (batch_id >= rows_.size()) {
    throw Error(Errc::kConfig, "batch id " + std::to_string(batch_id) + " out of range",
                batch_id);
  }
  return rows_[batch_id].size();
}

std::optional<double> LossHistory::at(std::size_t batch_id, std::size_t epoch) const {
  if (batch_id >= rows_.size() || epoch == 0 || epoch > rows_[batch_id].size()) {
    return std::nullopt;
  }
  return rows_[batch_id][epoch - 1];
}

void LossHistory::record(std::size_t batch_id, std::size_t epoch, double loss) {
  if (!std::isfinite(loss)) {
    throw Error(Errc::kNumeric, "non-finite loss for batch " + std::to_string(batch_id),
                batch_id);
  }
  auto& row = rows_.at(batch_id);
  if (epoch == 0) throw Error(Errc::kConfig, "epochs are 1-based");
  if (epoch <= row.size()) {
    throw Error(Errc::kDuplicateRecord, "loss for batch " + std::to_string(batch_id) +
                                            " epoch " + std::to_string(epoch) +
                                            " already recorded",
                batch_id);
  }
  if (epoch != row.size() + 1) {
    throw Error(Errc::kIncompleteHistory,
                "batch " + std::to_string(batch_id) + " has " + std::to_string(row.size()) +
                    " epochs recorded; cannot write epoch " + std::to_string(epoch),
                batch_id);
  }
  row.push_back(loss);
}

double LossHistory::historical_mean(std::size_t batch_id, std::size_t epoch) const {
  if (epoch < 2) {
    throw Error(Errc::kNoHistory, "no loss history before epoch 2", batch_id);
  }
  if (recorded(batch_id) < epoch - 1) {
    throw Error(Errc::kIncompleteHistory,
                "batch " + std::to_string(batch_id) + " lacks epochs before " +
                    std::to_string(epoch),
                batch_id);
  }
  const auto& row = rows_[batch_id];
  double sum = 0.0;
  for (std::size_t e = 0; e + 1 < epoch; ++e) sum += row[e];
  return sum / static_cast<double>(epoch - 1);
}

EpochStats epoch_stats(const LossHistory& h, std::size_t epoch, double alpha, double beta) {
  std::vector<double> s(h.num_batches());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = h.historical_mean(i, epoch);
  const MeanStd ms = mean_std_population(s);
  return {epoch, ms.mean, ms.std, ms.mean - alpha * ms.std, ms.mean + beta * ms.std, alpha,
          beta};
}

std::string_view pair_class_name(PairClass c) {
  switch (c) {
    case PairClass::kCorrect: return "correct";
    case PairClass::kNoisy: return "noisy";
    case PairClass::kFaulty: return "faulty";
  }
  return "correct";
}

PairVerdict pair_weight(double decision_value, const EpochStats& stats) {
  if (!std::isfinite(decision_value)) {
    throw Error(Errc::kNumeric, "non-finite DBPM decision value");
  }
  PairVerdict v;
  if (decision_value >= stats.a && decision_value <= stats.b) return v;

  v.classification = decision_value < stats.a ? PairClass::kNoisy : PairClass::kFaulty;
  if (!(stats.sigma > 0.0)) {
    v.weight = kMinPairWeight;
    return v;
  }
  const double z = (decision_value - stats.mu) / stats.sigma;
  const double density =
      std::exp(-0.5 * z * z) / (stats.sigma * std::sqrt(2.0 * std::numbers::pi));
  if (density > 1.0) v.clamped = true;
  v.weight = std::clamp(density, kMinPairWeight, 1.0);
  return v;
}

double weighted_loss(const PairVerdict& verdict, double l1) { return verdict.weight * l1; }

std::string_view decision_variable_name(DecisionVariable d) {
  return d == DecisionVariable::kCurrentLoss ? "current_loss" : "historical_mean";
}

DecisionVariable parse_decision_variable(std::string_view name) {
  if (name == "current_loss") return DecisionVariable::kCurrentLoss;
  if (name == "historical_mean") return DecisionVariable::kHistoricalMean;
  throw Error(Errc::kConfig, "unknown DBPM decision variable '" + std::string(name) + "'");
}

}  // namespace rfclip
