// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "rfclip/metrics.hpp"

namespace rfclip {
namespace {

using testing::error_code;
using testing::TestRng;

struct Labeled {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Scores drawn from `levels` distinct values so small level counts force ties.
Labeled random_labeled(TestRng& rng, std::size_t n, std::size_t levels) {
  Labeled out;
  for (std::size_t i = 0; i < n; ++i) {
    out.scores.push_back(static_cast<double>(rng.below(levels)) / static_cast<double>(levels));
    out.labels.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2)));
  }
  return out;
}

ScoredSet random_scored(TestRng& rng, std::size_t n, int groups) {
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(rng.uniform());
    s.labels.push_back(static_cast<int>(rng.below(2)));
    s.attr_codes.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(groups))));
  }
  // Every group gets both classes.
  for (int g = 0; g < groups; ++g) {
    for (int l = 0; l < 2; ++l) {
      s.scores.push_back(rng.uniform());
      s.labels.push_back(l);
      s.attr_codes.push_back(g);
    }
  }
  return s;
}

TEST(Auc, PerfectSeparation) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<int>{1, 1, 0, 0}), 1.0);
}

TEST(Auc, AllTiesIsHalf) {
  EXPECT_EQ(auc(std::vector<double>(6, 0.4), std::vector<int>{1, 0, 1, 0, 0, 1}), 0.5);
}

TEST(Auc, ThreeOfFourPairs) {
  const std::vector<double> s{0.9, 0.2, 0.8, 0.3};
  const std::vector<int> l{1, 0, 0, 1};
  EXPECT_EQ(auc(s, l), 0.75);
  EXPECT_EQ(testing::brute_force_auc(s, l), 0.75);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_EQ(error_code([] { auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}); }),
            Errc::kUndefinedAuc);
  EXPECT_EQ(error_code([] { auc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}); }),
            Errc::kUndefinedAuc);
  EXPECT_EQ(error_code([] { auc(std::vector<double>{0.1}, std::vector<int>{0, 1}); }),
            Errc::kShape);
}

TEST(AucProperty, MatchesPairCountIncludingTies) {
  TestRng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(499);
    const std::size_t levels = t % 3 == 0 ? 2 + rng.below(4) : 1000000;
    const Labeled d = random_labeled(rng, n, levels);
    ASSERT_NEAR(auc(d.scores, d.labels), testing::brute_force_auc(d.scores, d.labels), 1e-12)
        << "instance " << t;
  }
}

TEST(AucProperty, StrictlyIncreasingTransformIsExact) {
  TestRng rng(2);
  for (int t = 0; t < 200; ++t) {
    const Labeled d = random_labeled(rng, 2 + rng.below(200), t % 2 ? 5 : 100000);
    std::vector<double> moved = d.scores;
    for (double& x : moved) x = x * x * x + x;
    ASSERT_EQ(auc(moved, d.labels), auc(d.scores, d.labels));
  }
}

TEST(AucProperty, NegatedScoresComplement) {
  TestRng rng(3);
  for (int t = 0; t < 200; ++t) {
    Labeled d;
    const std::size_t n = 2 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) {
      d.scores.push_back(rng.uniform(-1, 1));
      d.labels.push_back(i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2)));
    }
    std::vector<double> neg = d.scores;
    for (double& x : neg) x = -x;
    ASSERT_NEAR(auc(d.scores, d.labels) + auc(neg, d.labels), 1.0, 1e-12);
  }
}

TEST(GroupAuc, OneGroupIsOverall) {
  const ScoredSet s{{0.9, 0.2, 0.8, 0.3}, {1, 0, 0, 1}, {4, 4, 4, 4}};
  const GroupAuc g = group_auc(s);
  ASSERT_EQ(g.values.size(), 1u);
  EXPECT_EQ(g.values.at(4), auc(s.scores, s.labels));
  EXPECT_TRUE(g.omitted.empty());
}

TEST(GroupAuc, IdenticalMultisetsGiveEqualValues) {
  const ScoredSet s{{0.9, 0.4, 0.6, 0.3, 0.6, 0.9, 0.3, 0.4}, {1, 0, 0, 1, 0, 1, 1, 0},
                    {0, 0, 0, 0, 1, 1, 1, 1}};
  const GroupAuc g = group_auc(s);
  EXPECT_EQ(g.values.at(0), g.values.at(1));
}

TEST(GroupAuc, SeparatedAndTiedGroups) {
  const ScoredSet s{{0.9, 0.1, 0.5, 0.5}, {1, 0, 1, 0}, {0, 0, 1, 1}};
  const GroupAuc g = group_auc(s);
  EXPECT_EQ(g.values.at(0), 1.0);
  EXPECT_EQ(g.values.at(1), 0.5);
}

TEST(GroupAuc, SingleClassGroupOmitted) {
  const ScoredSet s{{0.9, 0.1, 0.5, 0.4}, {1, 0, 1, 1}, {0, 0, 2, 2}};
  const GroupAuc g = group_auc(s);
  EXPECT_EQ(g.values.size(), 1u);
  EXPECT_EQ(g.omitted, std::vector<int>{2});
}

TEST(EsAuc, TableRows) {
  // CLIP / race, FairCLIP / race and CLIP / gender.
  EXPECT_NEAR(es_auc(0.6368, {{0, 0.6644}, {1, 0.7055}, {2, 0.6112}}), 0.5676, 5e-4);
  EXPECT_NEAR(es_auc(0.676, {{0, 0.656}, {1, 0.681}, {2, 0.672}}), 0.657, 1e-3);
  EXPECT_NEAR(es_auc(0.6368, {{0, 0.6102}, {1, 0.6728}}), 0.5993, 5e-4);
}

TEST(EsAuc, ZeroGapsGiveOverall) {
  EXPECT_EQ(es_auc(0.71, {{0, 0.71}, {1, 0.71}, {5, 0.71}}), 0.71);
  EXPECT_EQ(es_auc(0.71, {}), 0.71);
}

TEST(EsAucProperty, NeverAboveOverall) {
  TestRng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const double overall = rng.uniform();
    std::map<int, double> groups;
    const std::size_t k = 1 + rng.below(5);
    for (std::size_t g = 0; g < k; ++g) groups[static_cast<int>(g)] = rng.uniform();
    const double v = es_auc(overall, groups);
    ASSERT_LE(v, overall);
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, overall) << "gaps are nonzero almost surely";
  }
}

TEST(Dpd, Examples) {
  const std::vector<int> same{1, 0, 1, 0};
  EXPECT_EQ(dpd(same, std::vector<int>{0, 0, 1, 1}), 0.0);
  const std::vector<int> preds{1, 1, 0, 0, 1, 0, 0, 0};
  const std::vector<int> codes{0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_EQ(dpd(preds, codes), 0.25);
  EXPECT_EQ(dpd(preds, std::vector<int>(8, 3)), 0.0);
  EXPECT_EQ(error_code([] { dpd(std::vector<int>{}, std::vector<int>{}); }), Errc::kMetric);
}

TEST(DeOdds, Examples) {
  const std::vector<int> labels{1, 1, 0, 0, 1, 1, 0, 0};
  const std::vector<int> codes{0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_EQ(deodds(std::vector<int>{1, 0, 1, 0, 1, 0, 1, 0}, labels, codes), 0.0);
  EXPECT_EQ(deodds(std::vector<int>{1, 1, 0, 0, 1, 0, 0, 0}, labels, codes), 0.5);
  EXPECT_EQ(deodds(std::vector<int>{1, 1, 0, 0, 1, 0, 0, 0}, labels, std::vector<int>(8, 0)),
            0.0);
}

TEST(DeOdds, GroupMissingClassNamesIt) {
  try {
    deodds(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}, std::vector<int>{0, 0, 7});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMetric);
    EXPECT_NE(std::string(e.what()).find("group 7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
}

TEST(FairnessProperty, RelabelingGroupsChangesNothing) {
  TestRng rng(5);
  for (int t = 0; t < 500; ++t) {
    const int groups = 1 + static_cast<int>(rng.below(5));
    const ScoredSet s = random_scored(rng, 4 + rng.below(60), groups);
    const auto preds = threshold_predictions(s.scores, 0.5);
    std::vector<int> perm(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) perm[static_cast<std::size_t>(g)] = 10 * g + 3;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<int> relabeled;
    for (int c : s.attr_codes) relabeled.push_back(perm[static_cast<std::size_t>(c)]);
    ASSERT_EQ(dpd(preds, relabeled), dpd(preds, s.attr_codes));
    ASSERT_EQ(deodds(preds, s.labels, relabeled), deodds(preds, s.labels, s.attr_codes));
  }
}

TEST(Report, ValuesInUnitIntervalAndEsAucBelowAuc) {
  TestRng rng(6);
  for (int t = 0; t < 300; ++t) {
    const ScoredSet s = random_scored(rng, 10 + rng.below(80), 1 + static_cast<int>(rng.below(4)));
    const MetricsReport r = compute_report("g", s);
    for (double v : {r.auc, r.es_auc, r.dpd, r.deodds}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    ASSERT_LE(r.es_auc, r.auc);
    bool all_equal = true;
    for (const auto& [g, v] : r.group_auc) all_equal = all_equal && std::abs(v - r.auc) <= 1e-12;
    ASSERT_EQ(std::abs(r.es_auc - r.auc) <= 1e-12, all_equal);
  }
}

TEST(Report, SingleGroupHasNoGaps) {
  const ScoredSet s{{0.9, 0.2, 0.8, 0.3}, {1, 0, 0, 1}, {0, 0, 0, 0}};
  const MetricsReport r = compute_report("sex", s, 0.5);
  EXPECT_EQ(r.attribute, "sex");
  EXPECT_EQ(r.dpd, 0.0);
  EXPECT_EQ(r.deodds, 0.0);
  EXPECT_EQ(r.es_auc, r.auc);
  EXPECT_EQ(r.threshold, 0.5);
}

TEST(Threshold, InclusiveCut) {
  EXPECT_EQ(threshold_predictions(std::vector<double>{0.49, 0.5, 0.51}, 0.5),
            (std::vector<int>{0, 1, 1}));
}

SampleSet tiny_set(const std::vector<std::vector<double>>& images, const std::vector<int>& labels) {
  SampleSet set;
  set.header.dim_image = images[0].size();
  set.header.dim_text = images[0].size();
  set.header.attributes = {{"g", 2}};
  for (std::size_t i = 0; i < images.size(); ++i) {
    set.samples.push_back(
        {"s" + std::to_string(i), images[i], images[i], labels[i], {{"g", static_cast<int>(i % 2)}}, {}});
  }
  return set;
}

EncoderParams identity_params(std::size_t k) {
  EncoderParams p;
  p.w_img = Matrix::identity(k);
  p.w_txt = Matrix::identity(k);
  p.log_temp = 0.0;
  return p;
}

TEST(Scores, EqualPrototypesGiveHalf) {
  const SampleSet set = tiny_set({{1, 0}, {0.3, 0.7}, {-1, 2}}, {1, 0, 1});
  const Prototypes same{{0.6, 0.8}, {0.6, 0.8}};
  for (double s : classification_scores(identity_params(2), set, same).scores) EXPECT_EQ(s, 0.5);
}

TEST(Scores, OrthogonalPrototypesGiveLogisticOfOne) {
  const SampleSet set = tiny_set({{1, 0}, {0, 1}}, {1, 0});
  const ScoredSet s = classification_scores(identity_params(2), set, {{1, 0}, {0, 1}}, "g");
  EXPECT_NEAR(s.scores[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(s.scores[0], 0.7311, 1e-4);
  EXPECT_NEAR(s.scores[1], 1.0 / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_EQ(s.attr_codes, (std::vector<int>{0, 1}));
  EXPECT_EQ(s.labels, (std::vector<int>{1, 0}));
}

TEST(Scores, Deterministic) {
  const SampleSet set = tiny_set({{1, 0.2}, {0.1, 1}, {0.5, 0.5}, {-0.3, 0.9}}, {1, 0, 1, 0});
  const EncoderParams p = init_params(2, 2, 3, 4);
  const Prototypes proto = fit_prototypes(p, set);
  EXPECT_EQ(classification_scores(p, set, proto).scores, classification_scores(p, set, proto).scores);
}

TEST(Prototypes, AreUnitMeansOfClassText) {
  const SampleSet set = tiny_set({{2, 0}, {0, 3}, {0, 1}}, {1, 0, 1});
  const Prototypes proto = fit_prototypes(identity_params(2), set);
  EXPECT_NEAR(proto.neg[0], 0.0, 1e-15);
  EXPECT_NEAR(proto.neg[1], 1.0, 1e-15);
  // Positive rows normalize to (1,0) and (0,1); their mean points along the diagonal.
  EXPECT_NEAR(proto.pos[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(proto.pos[1], std::sqrt(0.5), 1e-15);
}

TEST(Prototypes, MissingClassRejected) {
  const SampleSet set = tiny_set({{2, 0}, {0, 3}}, {1, 1});
  EXPECT_EQ(error_code([&] { fit_prototypes(identity_params(2), set); }), Errc::kPrototype);
}

}  // namespace
}  // namespace rfclip
