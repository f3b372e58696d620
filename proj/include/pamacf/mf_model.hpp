#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pamacf/common.hpp"
#include "pamacf/dataset.hpp"

namespace pamacf {

/// User matrix U (n_users x dim) and item matrix V (n_items x dim), row-major.
///
/// Entries are held in double precision while training; the on-disk format
/// stores f32, so `round_to_storage()` gives the values a save/load cycle
/// reproduces exactly.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t n_users, std::size_t n_items, std::size_t dim);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t dim() const { return dim_; }

  std::span<double> user(UserId u) { return {users_.data() + static_cast<std::size_t>(u) * dim_, dim_}; }
  std::span<const double> user(UserId u) const { return {users_.data() + static_cast<std::size_t>(u) * dim_, dim_}; }
  std::span<double> item(ItemId i) { return {items_.data() + static_cast<std::size_t>(i) * dim_, dim_}; }
  std::span<const double> item(ItemId i) const { return {items_.data() + static_cast<std::size_t>(i) * dim_, dim_}; }

  std::vector<double>& user_data() { return users_; }
  const std::vector<double>& user_data() const { return users_; }
  std::vector<double>& item_data() { return items_; }
  const std::vector<double>& item_data() const { return items_; }

  void round_to_storage();
  bool all_finite() const;

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> users_;
  std::vector<double> items_;
};

/// Every entry i.i.d. Normal(0, scale^2) from a stream seeded by `seed`.
/// scale == 0 yields the all-zero model.
EmbeddingModel init_embeddings(std::size_t n_users, std::size_t n_items, std::size_t dim, std::uint64_t seed,
                               double scale = 0.1);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

double score(const EmbeddingModel& m, UserId u, ItemId i);

/// Top-k items for `u` excluding train(u); descending score, ties by smaller id.
std::vector<ItemId> recommend_top_k(const EmbeddingModel& m, const InteractionDataset& ds, UserId u, std::size_t k);

double user_norm(const EmbeddingModel& m, UserId u);
double mean_user_norm(const EmbeddingModel& m);

inline constexpr char kModelMagic[4] = {'P', 'A', 'M', 'A'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const EmbeddingModel& m, std::ostream& out);
void save_model(const EmbeddingModel& m, const std::filesystem::path& path);
EmbeddingModel load_model(std::istream& in);
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace pamacf
