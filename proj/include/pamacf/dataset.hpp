#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "pamacf/common.hpp"
#include "pamacf/rng.hpp"

namespace pamacf {

using ItemList = std::vector<ItemId>;

/// Implicit-feedback interactions with per-user train/validation/test lists.
///
/// Ids are dense (0..n-1). `user_original_ids[u]` / `item_original_ids[i]`
/// keep the id each dense index had in the source file.
struct InteractionDataset {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<ItemList> train;
  std::vector<ItemList> validation;
  std::vector<ItemList> test;
  std::vector<std::uint32_t> item_popularity;
  std::vector<std::uint64_t> user_original_ids;
  std::vector<std::uint64_t> item_original_ids;

  bool in_train(UserId u, ItemId i) const;
  // Any of train, validation or test.
  bool interacted(UserId u, ItemId i) const;
  std::size_t train_interactions() const;
  void recompute_popularity();
  // Throws DataError if any structural invariant is broken.
  void check_invariants() const;
};

struct SplitConfig {
  double test_fraction = 0.2;
  double validation_fraction = 0.1;  // of each user's pre-split train list
  std::size_t min_interactions = 10;
  std::uint64_t seed = 2024;

  void validate() const;
};

/// Parses `<user> <item> <item> ...` lines. Blank lines and lines starting
/// with '#' are skipped. Ids are remapped densely in first-appearance order;
/// repeated items within a user are dropped.
InteractionDataset parse_interactions(std::istream& in, std::string_view source = "<stream>");
InteractionDataset load_interactions(const std::filesystem::path& path);

/// Removes users and items with fewer than `min_k` train interactions,
/// repeating until nothing changes. Ids are re-densified.
InteractionDataset filter_min_interactions(const InteractionDataset& ds, std::size_t min_k);

/// Per-user split: ceil(test_fraction*|L|) test items, then
/// floor(validation_fraction*|L|) validation items from what is left.
InteractionDataset split(const InteractionDataset& ds, const SplitConfig& cfg);

/// Uniform draw from items not in train(u) by rejection.
ItemId sample_negative(const InteractionDataset& ds, UserId u, Rng& rng);

void write_interactions(std::ostream& out, const std::vector<ItemList>& lists, UserId first_user = 0);
void write_id_map(std::ostream& out, const std::vector<std::uint64_t>& original_ids);

/// Split directory layout: train.txt, valid.txt, test.txt (dense ids) plus
/// users.csv / items.csv id maps (`original_id,dense_id`).
void save_split_dir(const std::filesystem::path& dir, const InteractionDataset& ds);
InteractionDataset load_split_dir(const std::filesystem::path& dir);

}  // namespace pamacf
