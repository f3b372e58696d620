#pragma once

#include <cstddef>
#include <cstdint>

#include "pamacf/dataset.hpp"

namespace pamacf {

/// Two user communities, each preferring half of the catalogue, with
/// Zipf-like item popularity.
struct SyntheticConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 300;
  std::size_t mean_interactions = 30;
  double zipf_exponent = 0.8;
  double cluster_affinity = 6.0;  // weight multiplier for in-cluster items
  std::uint64_t seed = 2024;

  void validate() const;
};

/// Train-only dataset; original ids equal dense ids.
InteractionDataset make_two_cluster(const SyntheticConfig& cfg);

}  // namespace pamacf
