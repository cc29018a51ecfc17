#include <algorithm>
#include <cmath>

#include "helpers.hpp"

using namespace scnn;
using testutil::expect_error;

namespace {

// precision-recall points, summed as a step function over recall increments
double step_sum_ap(const std::vector<bool>& flags, std::size_t total) {
  double area = 0, prev_recall = 0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k]) ++hits;
    const double recall = static_cast<double>(hits) / total;
    const double precision = static_cast<double>(hits) / (k + 1);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

QueryJudgment judgment(std::vector<bool> flags, std::size_t total = 0) {
  QueryJudgment j;
  j.relevant = std::move(flags);
  j.total_relevant = total ? total : std::max<std::size_t>(1, std::count(j.relevant.begin(), j.relevant.end(), true));
  return j;
}

}  // namespace

TEST(ReciprocalRank, Values) {
  EXPECT_EQ(reciprocal_rank({true, false}), 1.0);
  EXPECT_EQ(reciprocal_rank({false, false, false, true}), 0.25);
  EXPECT_EQ(reciprocal_rank({false, false}), 0.0);
  EXPECT_EQ(first_relevant_rank({false, true}), 2u);
  EXPECT_EQ(first_relevant_rank({false}), 0u);
}

TEST(MeanReciprocalRank, Values) {
  std::vector<QueryJudgment> js{judgment({true}), judgment({false, true}), judgment({false, false, false, true})};
  EXPECT_NEAR(mean_reciprocal_rank(js), (1 + 0.5 + 0.25) / 3, 1e-15);
  std::reverse(js.begin(), js.end());
  EXPECT_NEAR(mean_reciprocal_rank(js), (1 + 0.5 + 0.25) / 3, 1e-15);
  EXPECT_EQ(mean_reciprocal_rank(std::vector<QueryJudgment>{judgment({true}), judgment({true, false})}), 1.0);
  expect_error([] { mean_reciprocal_rank({}); }, ErrorCategory::data);
}

TEST(AveragePrecision, Values) {
  EXPECT_NEAR(average_precision({true, false, true}, 2), (1 + 2.0 / 3) / 2, 1e-15);
  EXPECT_EQ(average_precision({true, true, true}, 3), 1.0);
  EXPECT_EQ(average_precision({false, false}, 2), 0.0);
  EXPECT_NEAR(average_precision({true, false}, 4), 0.25, 1e-15);  // relevant items past the cutoff count against AP
  expect_error([] { average_precision({true}, 0); }, ErrorCategory::range);
}

TEST(MeanAveragePrecision, Values) {
  std::vector<QueryJudgment> js{judgment({true}, 1), judgment({false, true}, 1)};
  EXPECT_EQ(mean_average_precision(js), 0.75);
  std::swap(js[0], js[1]);
  EXPECT_EQ(mean_average_precision(js), 0.75);
  expect_error([] { mean_average_precision({}); }, ErrorCategory::data);
}

TEST(Metrics, MatchBruteForceOnRandomJudgments) {
  Rng rng(10);
  for (int set = 0; set < 1000; ++set) {
    std::vector<QueryJudgment> js;
    const std::size_t nq = 1 + rng.below(20);
    double map = 0, mrr = 0;
    for (std::size_t q = 0; q < nq; ++q) {
      std::vector<bool> flags(1 + rng.below(30));
      for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng.bernoulli(0.3);
      const std::size_t hits = std::count(flags.begin(), flags.end(), true);
      const std::size_t total = std::max<std::size_t>(1, hits + rng.below(3));
      // full-sort style oracle: first relevant by scanning sorted positions
      std::size_t first = 0;
      for (std::size_t i = flags.size(); i-- > 0;)
        if (flags[i]) first = i + 1;
      mrr += first ? 1.0 / first : 0.0;
      map += step_sum_ap(flags, total);
      js.push_back(judgment(flags, total));
    }
    ASSERT_NEAR(mean_average_precision(js), map / nq, 1e-12);
    ASSERT_NEAR(mean_reciprocal_rank(js), mrr / nq, 1e-12);
  }
}

TEST(EvaluateRetrieval, SeparatedClustersArePerfect) {
  std::vector<EmbeddingEntry> entries;
  Rng rng(2);
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 6; ++i)
      entries.push_back({"c" + std::to_string(c) + "_" + std::to_string(i), c,
                         {static_cast<float>(100 * c + 0.01 * rng.uniform()), static_cast<float>(0.01 * rng.uniform())}});
  const auto idx = EmbeddingIndex::build(entries);
  const MetricsReport r = evaluate_retrieval(idx, entries);
  EXPECT_EQ(r.map, 1.0);
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_EQ(r.q, entries.size());
  EXPECT_EQ(r.per_class.size(), 4u);
  EXPECT_EQ(r.queries.size(), entries.size());
}

TEST(EvaluateRetrieval, ChanceLevelIsClassPrior) {
  Rng rng(3);
  std::vector<EmbeddingEntry> entries;
  for (int i = 0; i < 500; ++i) {
    std::vector<float> v(8);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    entries.push_back({"q" + std::to_string(i), i % 5, v});
  }
  const MetricsReport r = evaluate_retrieval(EmbeddingIndex::build(entries), entries);
  EXPECT_EQ(r.q, 500u);
  EXPECT_NEAR(r.map, 0.2, 0.05);
}

TEST(EvaluateRetrieval, SkipsQueriesWithoutRelevantItemsAndRejectsUnknownLabels) {
  std::vector<EmbeddingEntry> entries{{"a", 0, {0}}, {"b", 0, {1}}, {"lonely", 1, {5}}};
  const MetricsReport r = evaluate_retrieval(EmbeddingIndex::build(entries), entries);
  EXPECT_EQ(r.q, 2u);
  EXPECT_EQ(r.skipped, std::vector<std::string>{"lonely"});
  entries.push_back({"mystery", kUnknownLabel, {2}});
  const std::string msg =
      expect_error([&] { evaluate_retrieval(EmbeddingIndex::build(entries), entries); }, ErrorCategory::data);
  EXPECT_NE(msg.find("mystery"), std::string::npos);
}

TEST(EvaluateRetrieval, CutoffAndJson) {
  std::vector<EmbeddingEntry> entries{{"a", 0, {0}}, {"b", 1, {1}}, {"c", 0, {3}}, {"d", 1, {10}}};
  const MetricsReport r = evaluate_retrieval(EmbeddingIndex::build(entries), entries, 1);
  // a -> b (miss), b -> a (miss), c -> b (miss), d -> c (miss)
  EXPECT_EQ(r.mrr, 0.0);
  const auto j = r.to_json();
  EXPECT_TRUE(j["queries"][0]["first_relevant_rank"].is_null());
  EXPECT_EQ(j.begin().key(), "map");
  const MetricsReport full = evaluate_retrieval(EmbeddingIndex::build(entries), entries);
  EXPECT_EQ(full.to_json()["queries"][0]["first_relevant_rank"], 2);
  EXPECT_EQ(full.to_json().dump(), full.to_json().dump());
}
