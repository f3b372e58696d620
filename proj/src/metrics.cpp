#include "pamacf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace pamacf {

namespace {

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

bool contains(const ItemList& sorted, ItemId i) { return std::binary_search(sorted.begin(), sorted.end(), i); }

// Position (1-based) of `item` within the first k entries, 0 when absent.
std::size_t rank_of(const std::vector<ItemId>& list, ItemId item, std::size_t k) {
  const std::size_t n = std::min(k, list.size());
  for (std::size_t r = 0; r < n; ++r)
    if (list[r] == item) return r + 1;
  return 0;
}

void check_k(std::size_t k) {
  if (k == 0) throw UsageError("k must be >= 1");
}

template <class PerUser>
double macro_average(const Rankings& recs, const std::vector<ItemList>& test, PerUser&& per_user) {
  double total = 0.0;
  std::size_t users = 0;
  const std::size_t n = std::min(recs.size(), test.size());
  for (std::size_t u = 0; u < n; ++u) {
    if (test[u].empty()) continue;
    total += per_user(recs[u], test[u]);
    ++users;
  }
  if (users == 0) throw DataError("no users with test interactions to evaluate");
  return total / static_cast<double>(users);
}

template <class Gain>
double target_metric(const Rankings& recs, const InteractionDataset& ds, const std::vector<ItemId>& targets,
                     std::size_t k, std::size_t n_genuine, Gain&& gain) {
  check_k(k);
  if (targets.empty()) throw UsageError("target metrics need at least one target");
  const std::size_t n = std::min({n_genuine, recs.size(), ds.n_users});
  double total = 0.0;
  for (ItemId t : targets) {
    double sum = 0.0;
    std::size_t eligible = 0;
    for (UserId u = 0; u < n; ++u) {
      if (ds.interacted(u, t)) continue;
      ++eligible;
      const std::size_t r = rank_of(recs[u], t, k);
      if (r) sum += gain(r);
    }
    if (eligible == 0)
      throw DataError("every genuine user interacted with target item " + std::to_string(t));
    total += sum / static_cast<double>(eligible);
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace

double recall_at_k(const Rankings& recs, const std::vector<ItemList>& test, std::size_t k) {
  check_k(k);
  return macro_average(recs, test, [k](const std::vector<ItemId>& list, const ItemList& t) {
    std::size_t hits = 0;
    const std::size_t n = std::min(k, list.size());
    for (std::size_t r = 0; r < n; ++r) hits += contains(t, list[r]);
    return static_cast<double>(hits) / static_cast<double>(t.size());
  });
}

double user_ndcg(const std::vector<ItemId>& list, const ItemList& test, std::size_t k) {
  check_k(k);
  if (test.empty()) throw DataError("NDCG of an empty test list");
  double dcg = 0.0, ideal = 0.0;
  const std::size_t n = std::min(k, list.size());
  for (std::size_t r = 0; r < n; ++r)
    if (contains(test, list[r])) dcg += discount(r + 1);
  const std::size_t ideal_hits = std::min(k, test.size());
  for (std::size_t r = 1; r <= ideal_hits; ++r) ideal += discount(r);
  return dcg / ideal;
}

double ndcg_at_k(const Rankings& recs, const std::vector<ItemList>& test, std::size_t k) {
  check_k(k);
  return macro_average(recs, test,
                       [k](const std::vector<ItemId>& list, const ItemList& t) { return user_ndcg(list, t, k); });
}

double target_hit_ratio(const Rankings& recs, const InteractionDataset& ds, const std::vector<ItemId>& targets,
                        std::size_t k, std::size_t n_genuine) {
  return target_metric(recs, ds, targets, k, n_genuine, [](std::size_t) { return 1.0; });
}

double target_ndcg(const Rankings& recs, const InteractionDataset& ds, const std::vector<ItemId>& targets,
                   std::size_t k, std::size_t n_genuine) {
  return target_metric(recs, ds, targets, k, n_genuine, [](std::size_t r) { return discount(r); });
}

Rankings rank_users(const EmbeddingModel& m, const InteractionDataset& ds, std::size_t k, std::size_t n_users) {
  Rankings out(n_users);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(n_users); ++u)
    out[u] = recommend_top_k(m, ds, static_cast<UserId>(u), k);
  return out;
}

Rankings rank_users_serial(const EmbeddingModel& m, const InteractionDataset& ds, std::size_t k,
                           std::size_t n_users) {
  Rankings out(n_users);
  for (UserId u = 0; u < n_users; ++u) out[u] = recommend_top_k(m, ds, u, k);
  return out;
}

std::optional<double> MetricsReport::get(const std::string& metric, std::size_t k) const {
  for (const auto& r : rows)
    if (r.metric == metric && r.k == k) return r.value;
  return std::nullopt;
}

MetricsReport evaluate(const EmbeddingModel& m, const InteractionDataset& ds, const std::vector<std::size_t>& ks,
                       const std::vector<ItemId>& targets, std::size_t n_genuine) {
  if (ks.empty()) throw UsageError("k-list must not be empty");
  for (std::size_t k : ks) check_k(k);
  if (m.n_users() != ds.n_users || m.n_items() != ds.n_items)
    throw DataError("model shape (" + std::to_string(m.n_users()) + "x" + std::to_string(m.n_items()) +
                    ") does not match dataset (" + std::to_string(ds.n_users) + "x" + std::to_string(ds.n_items) +
                    ")");
  n_genuine = std::min(n_genuine, ds.n_users);
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const Rankings recs = rank_users(m, ds, kmax, n_genuine);

  MetricsReport report;
  report.targets = targets;
  for (UserId u = 0; u < n_genuine; ++u) report.users_evaluated += !ds.test[u].empty();
  std::vector<ItemList> test(ds.test.begin(), ds.test.begin() + static_cast<std::ptrdiff_t>(n_genuine));
  for (std::size_t k : ks) report.rows.push_back({"recall", k, recall_at_k(recs, test, k)});
  for (std::size_t k : ks) report.rows.push_back({"ndcg", k, ndcg_at_k(recs, test, k)});
  if (!targets.empty()) {
    for (std::size_t k : ks) report.rows.push_back({"t_hr", k, target_hit_ratio(recs, ds, targets, k, n_genuine)});
    for (std::size_t k : ks) report.rows.push_back({"t_ndcg", k, target_ndcg(recs, ds, targets, k, n_genuine)});
  }
  return report;
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "metric,k,value\n";
  char buf[64];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.metric << ',' << r.k << ',' << buf << '\n';
  }
}

}  // namespace pamacf
