#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pamacf/dataset.hpp"

namespace pamacf {

enum class AttackMethod { random, bandwagon };

std::string_view to_string(AttackMethod method);
AttackMethod parse_attack_method(std::string_view text);

struct AttackSpec {
  AttackMethod method = AttackMethod::random;
  double budget = 0.01;  // fraction of genuine users
  std::vector<ItemId> targets;
  // Negative means "derive from the mean genuine profile length".
  long long filler_count = -1;
  double popular_fraction = 0.1;
  std::uint64_t seed = 2024;

  void validate(std::size_t n_items) const;
};

void to_json(nlohmann::json& j, const AttackSpec& spec);
void from_json(const nlohmann::json& j, AttackSpec& spec);

/// round(mean train length) - |targets|, floored at 0.
std::size_t default_filler_count(const InteractionDataset& ds, std::size_t n_targets);

/// Number of fake users: max(1, round(budget * n_users)).
std::size_t fake_user_count(std::size_t n_users, double budget);

/// Non-target items ranked by train popularity (ties by smaller id), the top
/// round(popular_fraction * n_items) of them.
std::vector<ItemId> popular_pool(const InteractionDataset& ds, const std::vector<ItemId>& targets,
                                 double popular_fraction);

/// Each profile is the target set plus fillers drawn without replacement.
std::vector<ItemList> generate_profiles(const InteractionDataset& ds, const AttackSpec& spec);

struct PoisonedDataset {
  InteractionDataset data;
  UserId fake_begin = 0;
  std::size_t fake_count = 0;
  AttackSpec provenance;

  bool is_fake(UserId u) const { return u >= fake_begin && u < fake_begin + fake_count; }
};

/// Appends profiles as train-only users after the genuine ones.
PoisonedDataset inject(const InteractionDataset& ds, const std::vector<ItemList>& profiles, const AttackSpec& spec);

/// The `count` least popular items whose train popularity is at least max(min_k, 1).
std::vector<ItemId> select_cold_targets(const InteractionDataset& ds, std::size_t count, std::size_t min_k);

/// Profiles in the interaction text format preceded by a `# fake` line.
void write_profiles(std::ostream& out, const std::vector<ItemList>& profiles, UserId first_user);

}  // namespace pamacf
