#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pamacf/dataset.hpp"
#include "pamacf/gaussian.hpp"
#include "pamacf/mf_model.hpp"
#include "pamacf/training.hpp"

namespace pamacf {

struct CorrelationResult {
  std::vector<double> norms;
  std::vector<double> thresholds;
  std::optional<double> spearman;  // nullopt when undefined
  std::string note;
};

/// quality[u][m] is user u's score at magnitudes[m] (ascending, magnitudes[0]
/// the baseline). Each threshold is the largest magnitude such that it and
/// every smaller grid magnitude score no worse than the baseline.
CorrelationResult epsilon_norm_correlation(std::span<const double> norms, std::span<const double> magnitudes,
                                           const std::vector<std::vector<double>>& quality, bool higher_is_better);

/// r_i <u_i', v'> after one adversarial epoch in which only user i is perturbed
/// (magnitude eps_i) and every other user has magnitude 0.
double single_user_adversarial_margin(const theory::GaussianState& s, std::size_t i, double eta, double lambda,
                                      double eps_i);

struct GaussianLabConfig {
  std::size_t n = 500;
  std::size_t d = 8;
  double sigma_ratio = 0.05;
  double eta = 0.001;
  double lambda = 1.0;
  std::size_t t = 5;
  std::size_t grid_points = 400;
  double grid_span = 3.0;  // grid reaches grid_span * max_i |u_i|/(eta*lambda)
  std::uint64_t seed = 2024;
};

/// Per-user 0/1 error after one adversarial epoch, swept over a magnitude grid.
CorrelationResult gaussian_lab(const GaussianLabConfig& cfg);

struct MfLabConfig {
  TrainConfig train;  // lambda, eta, batch size, seed; one APR epoch per magnitude
  std::vector<double> magnitudes;
  std::size_t k = 20;
};

/// Per-user NDCG@k after one APR epoch from `pretrained`, swept over magnitudes.
CorrelationResult mf_lab(const EmbeddingModel& pretrained, const InteractionDataset& ds, const MfLabConfig& cfg,
                         std::size_t n_genuine);

}  // namespace pamacf
