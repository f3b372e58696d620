#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pamacf/dataset.hpp"
#include "pamacf/mf_model.hpp"

namespace pamacf {

/// Ranked recommendation lists, one per user (index = user id). Lists may be
/// longer than k; only the first k entries count.
using Rankings = std::vector<std::vector<ItemId>>;

/// Macro-average over users with a non-empty test list (users >= n_eval are ignored).
double recall_at_k(const Rankings& recs, const std::vector<ItemList>& test, std::size_t k);
double ndcg_at_k(const Rankings& recs, const std::vector<ItemList>& test, std::size_t k);

/// NDCG@k of one ranked list against one non-empty sorted test list.
double user_ndcg(const std::vector<ItemId>& list, const ItemList& test, std::size_t k);

/// Per target: share of genuine users (ids < n_genuine) who never interacted
/// with it in any split and have it in their top k; averaged over targets.
double target_hit_ratio(const Rankings& recs, const InteractionDataset& ds, const std::vector<ItemId>& targets,
                        std::size_t k, std::size_t n_genuine);
double target_ndcg(const Rankings& recs, const InteractionDataset& ds, const std::vector<ItemId>& targets,
                   std::size_t k, std::size_t n_genuine);

/// Top-k lists for users 0..n_users-1, computed in parallel.
Rankings rank_users(const EmbeddingModel& m, const InteractionDataset& ds, std::size_t k, std::size_t n_users);
Rankings rank_users_serial(const EmbeddingModel& m, const InteractionDataset& ds, std::size_t k, std::size_t n_users);

struct MetricRow {
  std::string metric;
  std::size_t k;
  double value;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  std::size_t users_evaluated = 0;
  std::vector<ItemId> targets;

  std::optional<double> get(const std::string& metric, std::size_t k) const;
};

/// Recall/NDCG for every k, plus T-HR/T-NDCG when targets are given.
/// Users >= n_genuine (fake users) are never evaluated.
MetricsReport evaluate(const EmbeddingModel& m, const InteractionDataset& ds, const std::vector<std::size_t>& ks,
                       const std::vector<ItemId>& targets, std::size_t n_genuine);

void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace pamacf
