#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scnn/retrieval.hpp"

namespace scnn {

/// Ranked relevance of one query's results (true = same label as the query).
struct QueryJudgment {
  std::string query_id;
  int label = kUnknownLabel;
  std::vector<bool> relevant;
  std::size_t total_relevant = 0;  // relevant items in the whole candidate pool
};

/// 1-based rank of the first relevant item, 0 when there is none.
inline std::size_t first_relevant_rank(const std::vector<bool>& flags) {
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) return i + 1;
  return 0;
}

inline double reciprocal_rank(const std::vector<bool>& flags) {
  const std::size_t r = first_relevant_rank(flags);
  return r == 0 ? 0.0 : 1.0 / static_cast<double>(r);
}

/// Uninterpolated average precision: sum of precision@k over relevant
/// positions k, divided by the number of relevant items in the pool.
inline double average_precision(const std::vector<bool>& flags, std::size_t total_relevant) {
  if (total_relevant == 0) detail::fail(ErrorCategory::range, "eval-metrics", "average precision needs total_relevant >= 1");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (!flags[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(total_relevant);
}

inline double mean_reciprocal_rank(std::span<const QueryJudgment> judgments) {
  if (judgments.empty()) detail::fail(ErrorCategory::data, "eval-metrics", "MRR over zero queries");
  double sum = 0.0;
  for (const auto& j : judgments) sum += reciprocal_rank(j.relevant);
  return sum / static_cast<double>(judgments.size());
}

inline double mean_average_precision(std::span<const QueryJudgment> judgments) {
  if (judgments.empty()) detail::fail(ErrorCategory::data, "eval-metrics", "MAP over zero queries");
  double sum = 0.0;
  for (const auto& j : judgments) sum += average_precision(j.relevant, j.total_relevant);
  return sum / static_cast<double>(judgments.size());
}

struct QueryTrace {
  std::string id;
  int label = kUnknownLabel;
  std::size_t first_relevant_rank = 0;  // 0 = none retrieved
  double ap = 0.0;
};

struct ClassMetrics {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t q = 0;
};

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t q = 0;
  std::map<int, ClassMetrics> per_class;
  std::vector<QueryTrace> queries;
  std::vector<std::string> skipped;  // queries with no relevant item in the pool

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["map"] = map;
    j["mrr"] = mrr;
    j["q"] = q;
    nlohmann::ordered_json pc = nlohmann::ordered_json::object();
    for (const auto& [label, m] : per_class) pc[std::to_string(label)] = {{"map", m.map}, {"mrr", m.mrr}};
    j["per_class"] = pc;
    nlohmann::ordered_json qs = nlohmann::ordered_json::array();
    for (const auto& t : queries) {
      nlohmann::ordered_json e;
      e["id"] = t.id;
      if (t.first_relevant_rank == 0)
        e["first_relevant_rank"] = nullptr;
      else
        e["first_relevant_rank"] = t.first_relevant_rank;
      e["ap"] = t.ap;
      qs.push_back(std::move(e));
    }
    j["queries"] = qs;
    return j;
  }
};

inline std::vector<QueryJudgment> judge_queries(const EmbeddingIndex& index, const std::vector<EmbeddingEntry>& queries,
                                                std::optional<std::size_t> cutoff, bool exclude_self,
                                                std::vector<std::string>* skipped = nullptr) {
  std::vector<std::string> unknown;
  for (const auto& q : queries)
    if (q.label == kUnknownLabel) unknown.push_back(q.id);
  if (!unknown.empty()) {
    std::string ids;
    for (const auto& id : unknown) ids += (ids.empty() ? "" : ", ") + id;
    detail::fail(ErrorCategory::data, "eval-metrics", "queries with unknown labels: ", ids);
  }
  std::map<int, std::size_t> pool_counts;
  for (const auto& e : index.entries()) ++pool_counts[e.label];

  std::vector<QueryJudgment> out;
  for (const auto& q : queries) {
    std::size_t total = pool_counts[q.label];
    if (exclude_self) {
      if (const EmbeddingEntry* self = index.find(q.id); self && self->label == q.label) --total;
    }
    if (total == 0) {
      if (skipped) skipped->push_back(q.id);
      continue;
    }
    const std::size_t k = cutoff.value_or(index.size());
    const RetrievalResult res =
        query_knn(index, q.vector, std::max<std::size_t>(k, 1), exclude_self ? std::optional<std::string_view>(q.id) : std::nullopt);
    QueryJudgment j{q.id, q.label, {}, total};
    j.relevant.reserve(res.size());
    for (const auto& n : res) j.relevant.push_back(n.label == q.label);
    out.push_back(std::move(j));
  }
  return out;
}

/// Leave-one-out retrieval evaluation with same-label relevance. Queries whose
/// label has no other member in the pool are skipped and listed in the report.
inline MetricsReport evaluate_retrieval(const EmbeddingIndex& index, const std::vector<EmbeddingEntry>& queries,
                                        std::optional<std::size_t> cutoff = std::nullopt, bool exclude_self = true) {
  MetricsReport report;
  const std::vector<QueryJudgment> judgments = judge_queries(index, queries, cutoff, exclude_self, &report.skipped);
  report.q = judgments.size();
  report.map = mean_average_precision(judgments);
  report.mrr = mean_reciprocal_rank(judgments);
  std::map<int, std::vector<QueryJudgment>> by_class;
  for (const auto& j : judgments) {
    by_class[j.label].push_back(j);
    report.queries.push_back({j.query_id, j.label, first_relevant_rank(j.relevant), average_precision(j.relevant, j.total_relevant)});
  }
  for (const auto& [label, js] : by_class) {
    report.per_class[label] = {mean_average_precision(js), mean_reciprocal_rank(js), js.size()};
  }
  return report;
}

}  // namespace scnn
