// SPDX-License-Identifier: Apache-2.0
#include "rfclip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "rfclip/error.hpp"

namespace rfclip {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::kShape, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l == 1 ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(Errc::kUndefinedAuc, "AUC needs both classes (positives " +
                                         std::to_string(n_pos) + ", negatives " +
                                         std::to_string(n_neg) + ")");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a tie run over positions [lo, hi) gets (lo + hi + 1) / 2.
  double pos_rank_sum = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + hi + 1);
    for (std::size_t k = lo; k < hi; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    lo = hi;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

GroupAuc group_auc(const ScoredSet& set) {
  if (set.attr_codes.size() != set.scores.size() || set.labels.size() != set.scores.size()) {
    throw Error(Errc::kShape, "scored set columns differ in length");
  }
  GroupAuc out;
  const std::set<int> groups(set.attr_codes.begin(), set.attr_codes.end());
  for (int g : groups) {
    std::vector<double> s;
    std::vector<int> l;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
      if (set.attr_codes[i] == g) {
        s.push_back(set.scores[i]);
        l.push_back(set.labels[i]);
      }
    }
    const bool has_pos = std::find(l.begin(), l.end(), 1) != l.end();
    const bool has_neg = std::find(l.begin(), l.end(), 0) != l.end();
    if (!has_pos || !has_neg) {
      out.omitted.push_back(g);
      continue;
    }
    out.values[g] = auc(s, l);
  }
  return out;
}

double es_auc(double overall, const std::map<int, double>& group_aucs) {
  double gap = 0.0;
  for (const auto& [g, value] : group_aucs) gap += std::abs(overall - value);
  return overall / (1.0 + gap);
}

namespace {

struct GroupCounts {
  double n = 0, selected = 0;
  double pos = 0, true_pos = 0;
  double neg = 0, false_pos = 0;
};

std::map<int, GroupCounts> tally(std::span<const int> preds, std::span<const int> labels,
                                 std::span<const int> codes) {
  std::map<int, GroupCounts> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    GroupCounts& c = out[codes[i]];
    c.n += 1;
    c.selected += preds[i] == 1 ? 1 : 0;
    if (!labels.empty()) {
      if (labels[i] == 1) {
        c.pos += 1;
        c.true_pos += preds[i] == 1 ? 1 : 0;
      } else {
        c.neg += 1;
        c.false_pos += preds[i] == 1 ? 1 : 0;
      }
    }
  }
  return out;
}

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace

double dpd(std::span<const int> preds, std::span<const int> attr_codes) {
  if (preds.size() != attr_codes.size()) {
    throw Error(Errc::kShape, "predictions and attribute codes differ in length");
  }
  if (preds.empty()) throw Error(Errc::kMetric, "demographic parity of an empty set");
  std::vector<double> rates;
  for (const auto& [g, c] : tally(preds, {}, attr_codes)) rates.push_back(c.selected / c.n);
  return spread(rates);
}

double deodds(std::span<const int> preds, std::span<const int> labels,
              std::span<const int> attr_codes) {
  if (preds.size() != attr_codes.size() || labels.size() != preds.size()) {
    throw Error(Errc::kShape, "predictions, labels and attribute codes differ in length");
  }
  if (preds.empty()) throw Error(Errc::kMetric, "equalized odds of an empty set");
  std::vector<double> tpr, fpr;
  for (const auto& [g, c] : tally(preds, labels, attr_codes)) {
    if (c.pos == 0) {
      throw Error(Errc::kMetric, "group " + std::to_string(g) + " has no positive samples");
    }
    if (c.neg == 0) {
      throw Error(Errc::kMetric, "group " + std::to_string(g) + " has no negative samples");
    }
    tpr.push_back(c.true_pos / c.pos);
    fpr.push_back(c.false_pos / c.neg);
  }
  return std::max(spread(tpr), spread(fpr));
}

std::vector<int> threshold_predictions(std::span<const double> scores, double threshold) {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

MetricsReport compute_report(const std::string& attribute, const ScoredSet& set,
                             double threshold) {
  MetricsReport r;
  r.attribute = attribute;
  r.threshold = threshold;
  r.auc = auc(set.scores, set.labels);
  GroupAuc ga = group_auc(set);
  r.group_auc = std::move(ga.values);
  r.omitted_groups = std::move(ga.omitted);
  r.es_auc = es_auc(r.auc, r.group_auc);
  const auto preds = threshold_predictions(set.scores, threshold);
  r.dpd = dpd(preds, set.attr_codes);
  r.deodds = deodds(preds, set.labels, set.attr_codes);
  return r;
}

namespace {

std::vector<double> normalized_mean(const Matrix& rows, const std::vector<std::size_t>& which) {
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t r : which)
    for (std::size_t c = 0; c < rows.cols(); ++c) mean[c] += rows(r, c);
  const std::size_t k = mean.size();
  const Matrix unit = row_l2_normalize(Matrix(1, k, std::move(mean)));
  return {unit.row(0).begin(), unit.row(0).end()};
}

std::vector<std::size_t> all_indices(const SampleSet& set) {
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

Prototypes fit_prototypes(const EncoderParams& params, const SampleSet& set) {
  const auto idx = all_indices(set);
  const Matrix txt = row_l2_normalize(matmul(set.text_block(idx), params.w_txt));
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < set.size(); ++i) (set.samples[i].label == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw Error(Errc::kPrototype, std::string("class ") + (pos.empty() ? "1" : "0") +
                                      " absent from the prototype-fitting split");
  }
  try {
    return {normalized_mean(txt, pos), normalized_mean(txt, neg)};
  } catch (const Error& e) {
    throw Error(Errc::kPrototype, std::string("degenerate class prototype: ") + e.what());
  }
}

ScoredSet classification_scores(const EncoderParams& params, const SampleSet& set,
                                const Prototypes& prototypes, const std::string& attribute) {
  const std::size_t k = params.embed_dim();
  if (prototypes.pos.size() != k || prototypes.neg.size() != k) {
    throw Error(Errc::kShape, "prototype dimension does not match embedding dimension");
  }
  ScoredSet out;
  out.labels = set.labels();
  if (!attribute.empty()) out.attr_codes = set.codes(attribute);
  if (set.size() == 0) return out;

  const Matrix img = row_l2_normalize(matmul(set.image_block(all_indices(set)), params.w_img));
  const double t = params.temperature();
  out.scores.resize(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    double margin = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      margin += img(i, c) * (prototypes.pos[c] - prototypes.neg[c]);
    }
    out.scores[i] = sigmoid(t * margin);
  }
  return out;
}

}  // namespace rfclip
