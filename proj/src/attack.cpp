#include "pamacf/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pamacf {

std::string_view to_string(AttackMethod method) {
  return method == AttackMethod::random ? "random" : "bandwagon";
}

AttackMethod parse_attack_method(std::string_view text) {
  if (text == "random") return AttackMethod::random;
  if (text == "bandwagon") return AttackMethod::bandwagon;
  throw UsageError("unknown attack method '" + std::string(text) + "' (expected random|bandwagon)");
}

void AttackSpec::validate(std::size_t n_items) const {
  if (!(budget > 0.0)) throw UsageError("attack budget must be > 0");
  if (targets.empty()) throw UsageError("attack needs at least one target item");
  for (ItemId t : targets)
    if (t >= n_items) throw DataError("target item " + std::to_string(t) + " out of range");
  if (!(popular_fraction >= 0.0 && popular_fraction <= 1.0)) throw UsageError("popular fraction must be in [0,1]");
}

void to_json(nlohmann::json& j, const AttackSpec& spec) {
  j = nlohmann::json{{"method", std::string(to_string(spec.method))},
                     {"budget", spec.budget},
                     {"targets", spec.targets},
                     {"filler_count", spec.filler_count},
                     {"popular_fraction", spec.popular_fraction},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, AttackSpec& spec) {
  AttackSpec out;
  if (j.contains("method")) out.method = parse_attack_method(j.at("method").get<std::string>());
  if (j.contains("budget")) out.budget = j.at("budget").get<double>();
  if (j.contains("targets")) out.targets = j.at("targets").get<std::vector<ItemId>>();
  if (j.contains("filler_count")) out.filler_count = j.at("filler_count").get<long long>();
  if (j.contains("popular_fraction")) out.popular_fraction = j.at("popular_fraction").get<double>();
  if (j.contains("seed")) out.seed = j.at("seed").get<std::uint64_t>();
  spec = std::move(out);
}

std::size_t default_filler_count(const InteractionDataset& ds, std::size_t n_targets) {
  if (ds.n_users == 0) return 0;
  const double mean = static_cast<double>(ds.train_interactions()) / static_cast<double>(ds.n_users);
  const auto len = static_cast<long long>(std::llround(mean));
  return static_cast<std::size_t>(std::max(0LL, len - static_cast<long long>(n_targets)));
}

std::size_t fake_user_count(std::size_t n_users, double budget) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(budget * static_cast<double>(n_users))));
}

std::vector<ItemId> popular_pool(const InteractionDataset& ds, const std::vector<ItemId>& targets,
                                 double popular_fraction) {
  std::vector<ItemId> order;
  for (ItemId i = 0; i < ds.n_items; ++i)
    if (std::find(targets.begin(), targets.end(), i) == targets.end()) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return ds.item_popularity[a] > ds.item_popularity[b]; });
  const auto take = static_cast<std::size_t>(std::llround(popular_fraction * static_cast<double>(ds.n_items)));
  order.resize(std::min(order.size(), take));
  return order;
}

std::vector<ItemList> generate_profiles(const InteractionDataset& ds, const AttackSpec& spec) {
  spec.validate(ds.n_items);
  std::vector<ItemId> targets = spec.targets;
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  const std::size_t fillers =
      spec.filler_count < 0 ? default_filler_count(ds, targets.size()) : static_cast<std::size_t>(spec.filler_count);

  std::vector<ItemId> pool;
  if (spec.method == AttackMethod::bandwagon) {
    pool = popular_pool(ds, targets, spec.popular_fraction);
  } else {
    for (ItemId i = 0; i < ds.n_items; ++i)
      if (!std::binary_search(targets.begin(), targets.end(), i)) pool.push_back(i);
  }
  if (pool.size() < fillers)
    throw DataError("filler pool has " + std::to_string(pool.size()) + " items but " + std::to_string(fillers) +
                    " fillers were requested");

  const std::size_t n_fake = fake_user_count(ds.n_users, spec.budget);
  Rng rng = make_rng(spec.seed, 0xA77AC);
  std::vector<ItemList> profiles(n_fake);
  for (auto& profile : profiles) {
    // Partial Fisher-Yates over a copy gives a uniform subset without replacement.
    std::vector<ItemId> work = pool;
    for (std::size_t k = 0; k < fillers; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, work.size() - 1);
      std::swap(work[k], work[pick(rng)]);
    }
    profile.assign(targets.begin(), targets.end());
    profile.insert(profile.end(), work.begin(), work.begin() + static_cast<std::ptrdiff_t>(fillers));
    std::sort(profile.begin(), profile.end());
  }
  return profiles;
}

PoisonedDataset inject(const InteractionDataset& ds, const std::vector<ItemList>& profiles, const AttackSpec& spec) {
  PoisonedDataset out;
  out.data = ds;
  out.fake_begin = static_cast<UserId>(ds.n_users);
  out.fake_count = profiles.size();
  out.provenance = spec;
  auto& d = out.data;
  std::uint64_t next_original = 0;
  for (auto id : d.user_original_ids) next_original = std::max(next_original, id + 1);
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    ItemList list = profiles[p];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (ItemId i : list)
      if (i >= d.n_items)
        throw DataError("fake profile " + std::to_string(p) + " references item " + std::to_string(i) +
                        " outside the item universe");
    d.train.push_back(std::move(list));
    d.validation.emplace_back();
    d.test.emplace_back();
    d.user_original_ids.push_back(next_original + p);
  }
  d.n_users += profiles.size();
  d.recompute_popularity();
  return out;
}

std::vector<ItemId> select_cold_targets(const InteractionDataset& ds, std::size_t count, std::size_t min_k) {
  const std::size_t floor = std::max<std::size_t>(min_k, 1);
  std::vector<ItemId> eligible;
  for (ItemId i = 0; i < ds.n_items; ++i)
    if (ds.item_popularity[i] >= floor) eligible.push_back(i);
  std::stable_sort(eligible.begin(), eligible.end(),
                   [&](ItemId a, ItemId b) { return ds.item_popularity[a] < ds.item_popularity[b]; });
  if (eligible.size() < count)
    throw DataError("only " + std::to_string(eligible.size()) + " items have at least " + std::to_string(floor) +
                    " interactions; cannot pick " + std::to_string(count) + " targets");
  eligible.resize(count);
  return eligible;
}

void write_profiles(std::ostream& out, const std::vector<ItemList>& profiles, UserId first_user) {
  out << "# fake\n";
  write_interactions(out, profiles, first_user);
}

}  // namespace pamacf
