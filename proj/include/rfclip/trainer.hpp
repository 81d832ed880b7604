// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfclip/dataset.hpp"
#include "rfclip/dbpm.hpp"
#include "rfclip/encoder.hpp"
#include "rfclip/fair_ot.hpp"
#include "rfclip/metrics.hpp"

namespace rfclip {

/// Everything that determines a training run. Defaults: 10 epochs, batch
/// 32, Adam(lr 1e-5, betas (0.1, 0.1), weight decay 6e-5), fairness weight
/// 1e-7, Sinkhorn blur 1e-4 and DBPM band multipliers 3 / 3.
///
/// The logit scale is learnable, starts at ln(1/0.07) and is clamped at
/// ln(100).
struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 32;
  AdamHyper adam;
  double lambda = 1e-7;
  double eps = 1e-4;
  int sinkhorn_max_iter = 2000;
  double sinkhorn_tol = 1e-9;
  double alpha = 3.0;
  double beta = 3.0;
  std::string fairness_attribute;
  std::size_t embed_dim = 8;
  std::uint64_t init_seed = 0;
  std::uint64_t batch_seed = 1;
  bool dbpm = true;
  bool fairness = true;
  DecisionVariable dbpm_decision = DecisionVariable::kCurrentLoss;
  FairGradMode sinkhorn_grad = FairGradMode::kEnvelope;
  double threshold = 0.5;

  void validate() const;
  SinkhornOptions sinkhorn_options() const { return {eps, sinkhorn_max_iter, sinkhorn_tol}; }

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::ordered_json config_to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochCurve {
  int epoch = 0;
  double l1_mean = 0.0;
  double l2_mean = 0.0;
  double fair_mean = 0.0;
  double l3_mean = 0.0;
  std::optional<double> val_auc;

  bool operator==(const EpochCurve&) const = default;
};

struct AuditRecord {
  int epoch = 0;
  std::size_t batch_id = 0;
  double l1 = 0.0;
  std::optional<EpochStats> stats;  // absent in epoch 1
  std::optional<double> s;          // S(i, e), absent in epoch 1
  double weight = 1.0;
  PairClass classification = PairClass::kCorrect;
};

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
  int epoch = 0;
  /// DBPM history up to `epoch`; needed to resume with identical weights.
  std::optional<LossHistory> history;
  std::optional<double> val_auc;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void checkpoint_save(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

struct RunArtifacts {
  EncoderParams final_params;
  AdamState final_adam;
  std::vector<EpochCurve> curves;
  std::vector<AuditRecord> audit;
  std::vector<Checkpoint> checkpoints;  // one per completed epoch
  std::optional<Checkpoint> best;       // highest validation AUC
  LossHistory history;
  BatchPlan plan;
};

/// Per-batch quantities of one training step, exposed for gradient checks.
struct StepResult {
  double l1 = 0.0;
  double weight = 1.0;
  double fairness = 0.0;
  double l3 = 0.0;
  EncoderGrads grads;
};

/// Forward and backward for one batch with a fixed DBPM weight:
///   L3 = w · L1 + lambda · Σ_γ S_eps(B_W, B_W_γ).
/// `codes` may be empty when fairness is off.
StepResult batch_step(const EncoderParams& params, const Matrix& image_block,
                      const Matrix& text_block, std::span<const int> codes, double weight,
                      const TrainConfig& cfg, bool with_grad = true);

/// Runs cfg.epochs epochs over a fixed batch plan. When `resume` is given,
/// training continues after resume->epoch with its parameters, optimizer
/// state and DBPM history. Throws kDiverged on a non-finite loss.
RunArtifacts train(const TrainConfig& cfg, const SampleSet& train_set,
                   const SampleSet& val_set, const std::optional<Checkpoint>& resume = {});

struct AttributeEvaluation {
  std::optional<MetricsReport> report;
  std::string error;  // set when the report could not be computed
};

/// One report per attribute from a shared set of scores. Failures are
/// recorded per attribute and do not stop the others.
std::map<std::string, AttributeEvaluation> evaluate(const EncoderParams& params,
                                                   const SampleSet& test_set,
                                                   const std::vector<std::string>& attributes,
                                                   const Prototypes& prototypes,
                                                   double threshold = 0.5);

}  // namespace rfclip
