#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pamacf/common.hpp"
#include "pamacf/rng.hpp"

namespace pamacf::theory {

/// Single-item system: n genuine users u_i ~ N(r_i * u_bar, sigma^2 I), one
/// item embedding v, preference sign(<u, v>).
struct GaussianConfig {
  std::size_t d = 8;
  std::size_t n = 200;
  double sigma = 0.02;
  double u_bar_norm = 1.0;
  std::vector<double> u_bar;  // explicit mean; empty means u_bar_norm times a seeded direction
  double eta = 0.01;
  double lambda = 1.0;
  double epsilon = 0.0;
  std::size_t pretrain_epochs = 5;
  std::size_t adv_epochs = 3;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 2024;

  void validate() const;
  std::vector<double> resolved_u_bar() const;
};

struct GaussianState {
  std::size_t d = 0;
  std::size_t n_genuine = 0;  // users [n_genuine, n_users) are injected fakes
  std::vector<double> users;  // row-major, n_users x d
  std::vector<int> ratings;
  std::vector<double> v;
  std::size_t probe = 0;
  std::size_t epoch = 0;

  std::size_t n_users() const { return ratings.size(); }
  std::span<double> user(std::size_t i) { return {users.data() + i * d, d}; }
  std::span<const double> user(std::size_t i) const { return {users.data() + i * d, d}; }
};

/// Ratings uniform over {-1, +1}, users drawn around r_i * u_bar, v = mean r_i u_i.
GaussianState init_system(const GaussianConfig& cfg);

/// v(0) ~ N(u_bar, sigma^2/(n-1) I), the draw each direct-sampler replicate starts from.
std::vector<double> sample_initial_item(const GaussianConfig& cfg, std::span<const double> u_bar, Rng& rng);

/// +1 iff <u, v> > 0.
int preference(std::span<const double> u, std::span<const double> v);

/// u_i += eta r_i v; v += eta * sum r_i u_i, all from pre-step values.
void standard_epoch(GaussianState& s, double eta);

/// u_i <- (1 - eta*lambda*eps/|u_i|) u_i + eta(1+lambda) r_i v
/// v   <- v + eta(1+lambda) sum r_i u_i - (N eta lambda eps/|v|) v
void adversarial_epoch(GaussianState& s, double eta, double lambda, double epsilon);
/// Per-user magnitudes; the item shrink uses the sum of all user magnitudes.
void adversarial_epoch(GaussianState& s, double eta, double lambda, std::span<const double> epsilons);

/// Item scale after t standard epochs: v(t) = M(t, eta) v(0). M(0) = 1.
double transform_factor(std::size_t t, double eta, std::size_t n);

/// <v, v0>/|v0|^2, after checking v is collinear with v0 to 1e-8.
double item_scale_factor(const GaussianState& s, std::span<const double> v0);

/// Fake users with |u'|_inf <= alpha.
struct PoisonSpec {
  double alpha = 0.0;
  std::vector<double> fakes;  // row-major, n_prime x d
  std::vector<int> ratings;

  std::size_t n_prime() const { return ratings.size(); }
};

/// Appends the fakes and re-initialises v as the mean over genuine and fake
/// contributions. Expects an untrained state.
void inject_poison(GaussianState& s, const PoisonSpec& spec);

struct Probe {
  std::vector<double> u;
  int r = 1;
};

enum class ProbePolicy {
  // A user drawn from the population.
  sampled,
  // A user whose expected margin after t+1 standard epochs is zero.
  boundary,
};

enum class SamplerKind {
  // v(0) ~ N(u_bar, sigma^2/(n-1) I); other genuine users tracked through
  // their aggregate and mean squared norm.
  direct,
  // Every user simulated exactly; the population is rebuilt around the
  // same v(0) draw as the direct sampler.
  population,
};

Probe make_probe(const GaussianConfig& cfg, ProbePolicy policy);

/// Fakes resampled per replicate: entries uniform in [-alpha, alpha], each
/// rating chosen so the fake's contribution opposes the probe.
struct PoisonModel {
  std::size_t n_prime = 0;
  double alpha = 0.0;
};

PoisonSpec sample_poison(const PoisonModel& model, std::size_t d, const Probe& probe, Rng& rng);

/// Error counts along two paths sharing every random draw: `standard` runs
/// t + k standard epochs, `adversarial` runs t standard then k adversarial.
/// Index e is the state after e epochs.
struct ErrorTrajectory {
  std::size_t samples = 0;
  std::vector<std::uint64_t> standard;
  std::vector<std::uint64_t> adversarial;
  // On the adversarial path, replicates whose indicator went 0->1 (up) or
  // 1->0 (down) between epoch e and e+1.
  std::vector<std::uint64_t> adv_up;
  std::vector<std::uint64_t> adv_down;

  double rate_standard(std::size_t e) const;
  double rate_adversarial(std::size_t e) const;
  double se_standard(std::size_t e) const;
  double se_adversarial(std::size_t e) const;
  // I_adv(e) - I_adv(e+1) and its paired standard error.
  double reduction(std::size_t e) const;
  double reduction_se(std::size_t e) const;
};

ErrorTrajectory simulate_errors(const GaussianConfig& cfg, const Probe& probe, const std::optional<PoisonModel>& poison,
                                SamplerKind sampler = SamplerKind::direct);
ErrorTrajectory simulate_errors_serial(const GaussianConfig& cfg, const Probe& probe,
                                       const std::optional<PoisonModel>& poison,
                                       SamplerKind sampler = SamplerKind::direct);

enum class TrainingMode { standard, adversarial };

struct ErrorEstimate {
  double p = 0.0;
  double se = 0.0;
};

/// Error after t standard epochs (standard) or t standard + k adversarial epochs.
ErrorEstimate estimate_error(const GaussianConfig& cfg, TrainingMode mode, const Probe& probe,
                             const std::optional<PoisonModel>& poison = std::nullopt,
                             SamplerKind sampler = SamplerKind::direct);

double binomial_se(std::uint64_t hits, std::size_t samples);

/// Noise-free trajectory (every genuine user at r_i u_i = u_bar) used for the
/// bound inputs. Index e is the state after e epochs (t standard, then adversarial).
struct ReferencePath {
  std::vector<double> item_scale;   // C_e = v(e) / v(0)
  std::vector<double> probe_norm;   // |u_probe(e)|
  std::vector<double> item_shrink;  // n eta lambda eps / |v(e)|, the coefficient removed from v in the next adversarial epoch
};

ReferencePath reference_path(const GaussianConfig& cfg, const Probe& probe);

double normal_cdf(double x);
/// Phi(b) - Phi(a), accurate when both arguments sit in the same tail.
double normal_cdf_diff(double a, double b);

struct BoundsInput {
  std::size_t n = 0;
  std::size_t n_prime = 0;
  std::size_t d = 0;
  double sigma = 0.0;
  double u_bar_norm = 0.0;
  std::size_t u_bar_l0 = 0;  // nonzero coordinates of u_bar
  double eta = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double item_scale = 0.0;  // C_{t+k}
  double user_norm = 0.0;   // |u_(t+k)|

  double beta() const;
  double tau() const;
};

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
  double gamma = 1.0;
  double psi = 0.0;
  bool applicable = true;
  std::string reason;
};

/// Bounds on the error reduction of one adversarial epoch, clean or poisoned.
Bounds theorem_bounds(const BoundsInput& in, bool poisoned);

}  // namespace pamacf::theory
