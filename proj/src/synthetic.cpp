#include "pamacf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pamacf {

void SyntheticConfig::validate() const {
  if (n_users == 0 || n_items < 2) throw UsageError("synthetic data needs >= 1 user and >= 2 items");
  if (mean_interactions < 2 || mean_interactions * 3 / 2 > n_items)
    throw UsageError("mean interactions must be in [2, 2/3 of the item count]");
  if (!(zipf_exponent >= 0.0) || !(cluster_affinity >= 1.0)) throw UsageError("invalid synthetic shape parameters");
}

InteractionDataset make_two_cluster(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 0x5E17);

  std::vector<std::size_t> popularity_rank(cfg.n_items);
  std::iota(popularity_rank.begin(), popularity_rank.end(), 0);
  std::shuffle(popularity_rank.begin(), popularity_rank.end(), rng);
  std::vector<double> base(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i)
    base[i] = std::pow(static_cast<double>(popularity_rank[i]) + 1.0, -cfg.zipf_exponent);

  InteractionDataset ds;
  ds.n_users = cfg.n_users;
  ds.n_items = cfg.n_items;
  ds.train.resize(cfg.n_users);
  ds.validation.resize(cfg.n_users);
  ds.test.resize(cfg.n_users);
  ds.user_original_ids.resize(cfg.n_users);
  ds.item_original_ids.resize(cfg.n_items);
  std::iota(ds.user_original_ids.begin(), ds.user_original_ids.end(), 0);
  std::iota(ds.item_original_ids.begin(), ds.item_original_ids.end(), 0);

  const std::size_t spread = cfg.mean_interactions / 2;
  std::uniform_int_distribution<std::size_t> length(cfg.mean_interactions - spread, cfg.mean_interactions + spread);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, ItemId>> keys(cfg.n_items);
  for (UserId u = 0; u < cfg.n_users; ++u) {
    const std::size_t cluster = u % 2;
    const std::size_t len = length(rng);
    // Weighted sampling without replacement: keep the len largest log(U)/w keys.
    for (ItemId i = 0; i < cfg.n_items; ++i) {
      const double w = base[i] * (i % 2 == cluster ? cfg.cluster_affinity : 1.0);
      double r = unit(rng);
      while (r == 0.0) r = unit(rng);
      keys[i] = {std::log(r) / w, i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(len), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    auto& list = ds.train[u];
    for (std::size_t k = 0; k < len; ++k) list.push_back(keys[k].second);
    std::sort(list.begin(), list.end());
  }
  ds.recompute_popularity();
  return ds;
}

}  // namespace pamacf
