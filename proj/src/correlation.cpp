#include "pamacf/correlation.hpp"

#include <algorithm>
#include <cmath>

#include "pamacf/metrics.hpp"
#include "pamacf/stats.hpp"

namespace pamacf {

namespace {

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

CorrelationResult epsilon_norm_correlation(std::span<const double> norms, std::span<const double> magnitudes,
                                           const std::vector<std::vector<double>>& quality, bool higher_is_better) {
  if (magnitudes.empty()) throw UsageError("magnitude grid is empty");
  if (!std::is_sorted(magnitudes.begin(), magnitudes.end())) throw UsageError("magnitude grid must be ascending");
  if (quality.size() != norms.size()) throw UsageError("one quality row per user is required");
  CorrelationResult out;
  out.norms.assign(norms.begin(), norms.end());
  out.thresholds.reserve(norms.size());
  for (const auto& row : quality) {
    if (row.size() != magnitudes.size()) throw UsageError("quality row length differs from the magnitude grid");
    const double base = row[0];
    std::size_t last = 0;
    for (std::size_t m = 1; m < row.size(); ++m) {
      const bool ok = higher_is_better ? row[m] >= base : row[m] <= base;
      if (!ok) break;
      last = m;
    }
    out.thresholds.push_back(magnitudes[last]);
  }
  out.spearman = spearman(out.norms, out.thresholds);
  if (!out.spearman) out.note = "undefined: norms or thresholds are constant";
  return out;
}

double single_user_adversarial_margin(const theory::GaussianState& s, std::size_t i, double eta, double lambda,
                                      double eps_i) {
  const std::size_t d = s.d;
  const double g = eta * (1.0 + lambda);
  std::vector<double> total(d, 0.0);
  for (std::size_t j = 0; j < s.n_users(); ++j) {
    const auto u = s.user(j);
    for (std::size_t k = 0; k < d; ++k) total[k] += s.ratings[j] * u[k];
  }
  const auto u = s.user(i);
  const double scale = eta * lambda * eps_i;
  const double hu = scale != 0.0 ? scale / std::sqrt(dot_span(u, u)) : 0.0;
  const double hv = scale != 0.0 ? scale / std::sqrt(dot_span(s.v, s.v)) : 0.0;
  double margin = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double un = (1.0 - hu) * u[k] + g * s.ratings[i] * s.v[k];
    const double vn = s.v[k] + g * total[k] - hv * s.v[k];
    margin += un * vn;
  }
  return s.ratings[i] * margin;
}

CorrelationResult gaussian_lab(const GaussianLabConfig& cfg) {
  if (cfg.n < 10) throw UsageError("the correlation lab needs at least 10 users");
  if (cfg.grid_points < 1 || !(cfg.grid_span > 0.0) || !(cfg.lambda > 0.0))
    throw UsageError("lab needs grid_points >= 1, grid_span > 0 and lambda > 0");
  theory::GaussianConfig g;
  g.n = cfg.n;
  g.d = cfg.d;
  g.sigma = cfg.sigma_ratio;
  g.u_bar_norm = 1.0;
  g.eta = cfg.eta;
  g.lambda = cfg.lambda;
  g.seed = cfg.seed;
  auto s = theory::init_system(g);
  for (std::size_t e = 0; e < cfg.t; ++e) theory::standard_epoch(s, cfg.eta);

  std::vector<double> norms(s.n_users());
  double max_cap = 0.0;
  for (std::size_t i = 0; i < s.n_users(); ++i) {
    const auto u = s.user(i);
    norms[i] = std::sqrt(dot_span(u, u));
    max_cap = std::max(max_cap, norms[i] / (cfg.eta * cfg.lambda));
  }
  std::vector<double> magnitudes(cfg.grid_points + 1);
  for (std::size_t m = 0; m <= cfg.grid_points; ++m)
    magnitudes[m] = cfg.grid_span * max_cap * static_cast<double>(m) / static_cast<double>(cfg.grid_points);

  std::vector<std::vector<double>> errors(s.n_users(), std::vector<double>(magnitudes.size()));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s.n_users()); ++i)
    for (std::size_t m = 0; m < magnitudes.size(); ++m)
      errors[i][m] = single_user_adversarial_margin(s, static_cast<std::size_t>(i), cfg.eta, cfg.lambda,
                                                    magnitudes[m]) > 0.0
                         ? 0.0
                         : 1.0;
  return epsilon_norm_correlation(norms, magnitudes, errors, false);
}

CorrelationResult mf_lab(const EmbeddingModel& pretrained, const InteractionDataset& ds, const MfLabConfig& cfg,
                         std::size_t n_genuine) {
  if (cfg.magnitudes.empty()) throw UsageError("magnitude grid is empty");
  n_genuine = std::min(n_genuine, ds.n_users);
  std::vector<UserId> users;
  for (UserId u = 0; u < n_genuine; ++u)
    if (!ds.test[u].empty()) users.push_back(u);
  if (users.size() < 10) throw DataError("the correlation lab needs at least 10 users with test items");

  std::vector<std::vector<double>> ndcg(users.size(), std::vector<double>(cfg.magnitudes.size()));
  for (std::size_t m = 0; m < cfg.magnitudes.size(); ++m) {
    TrainConfig tc = cfg.train;
    tc.mode = TrainMode::apr;
    tc.epsilon = cfg.magnitudes[m];
    tc.pretrain_epochs = 0;
    tc.total_epochs = 1;
    tc.dim = pretrained.dim();
    EmbeddingModel model = pretrained;
    train(model, ds, tc);
    const Rankings recs = rank_users(model, ds, cfg.k, n_genuine);
    for (std::size_t j = 0; j < users.size(); ++j) ndcg[j][m] = user_ndcg(recs[users[j]], ds.test[users[j]], cfg.k);
  }
  std::vector<double> norms;
  norms.reserve(users.size());
  for (UserId u : users) norms.push_back(user_norm(pretrained, u));
  return epsilon_norm_correlation(norms, cfg.magnitudes, ndcg, true);
}

}  // namespace pamacf
