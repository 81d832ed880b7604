// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rfclip/dataset.hpp"
#include "rfclip/encoder.hpp"

namespace rfclip {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> attr_codes;
};

/// ROC AUC as the Mann-Whitney statistic with midranks, so tied
/// (positive, negative) pairs count one half. kUndefinedAuc without both
/// classes.
double auc(std::span<const double> scores, std::span<const int> labels);

struct GroupAuc {
  std::map<int, double> values;
  /// Groups skipped because they lack one of the two classes.
  std::vector<int> omitted;
};

GroupAuc group_auc(const ScoredSet& set);

/// overall / (1 + Σ_g |overall - group_g|)
double es_auc(double overall, const std::map<int, double>& group_aucs);

/// max_g P(pred=1 | g) - min_g P(pred=1 | g)
double dpd(std::span<const int> preds, std::span<const int> attr_codes);

/// max(TPR gap, FPR gap) across groups; kMetric when a group lacks a class.
double deodds(std::span<const int> preds, std::span<const int> labels,
              std::span<const int> attr_codes);

struct MetricsReport {
  std::string attribute;
  double auc = 0.0;
  std::map<int, double> group_auc;
  double es_auc = 0.0;
  double dpd = 0.0;
  double deodds = 0.0;
  double threshold = 0.5;
  std::vector<int> omitted_groups;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport compute_report(const std::string& attribute, const ScoredSet& set,
                             double threshold = 0.5);

/// Class prototypes in embedding space: normalized means of the encoded
/// text features of each class.
struct Prototypes {
  std::vector<double> pos;
  std::vector<double> neg;
};

Prototypes fit_prototypes(const EncoderParams& params, const SampleSet& set);

/// score_i = σ(temperature · (<f_img_i, pos> - <f_img_i, neg>)).
/// attr_codes are filled when `attribute` is nonempty.
ScoredSet classification_scores(const EncoderParams& params, const SampleSet& set,
                                const Prototypes& prototypes,
                                const std::string& attribute = {});

std::vector<int> threshold_predictions(std::span<const double> scores, double threshold);

}  // namespace rfclip
