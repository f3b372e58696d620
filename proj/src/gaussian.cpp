#include "pamacf/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <omp.h>

namespace pamacf::theory {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> standard_normal_vector(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(d);
  for (double& x : z) x = normal(rng);
  return z;
}

int random_rating(Rng& rng) { return std::bernoulli_distribution(0.5)(rng) ? 1 : -1; }

// Aggregate sum_i r_i u_i over every user in the state.
std::vector<double> rated_sum(const GaussianState& s) {
  std::vector<double> total(s.d, 0.0);
  for (std::size_t i = 0; i < s.n_users(); ++i) {
    const auto u = s.user(i);
    const double r = s.ratings[i];
    for (std::size_t k = 0; k < s.d; ++k) total[k] += r * u[k];
  }
  return total;
}

// Genuine users other than the probe, summarised by their rated aggregate S
// and mean squared norm Q. The probe and every fake are tracked exactly.
struct MeanFieldSystem {
  std::size_t n = 0;
  std::vector<double> aggregate;
  double mean_sq_norm = 0.0;
  std::vector<double> v;
  std::vector<double> probe;
  int probe_r = 1;
  std::vector<double> fakes;
  std::vector<int> fake_r;

  std::size_t d() const { return v.size(); }

  std::vector<double> fake_sum() const {
    std::vector<double> total(d(), 0.0);
    for (std::size_t f = 0; f < fake_r.size(); ++f)
      for (std::size_t k = 0; k < d(); ++k) total[k] += fake_r[f] * fakes[f * d() + k];
    return total;
  }

  bool probe_wrong() const { return preference(probe, v) != probe_r; }

  void epoch(double eta, double lambda, double eps, bool adversarial) {
    const std::size_t dim = d();
    const double g = adversarial ? eta * (1.0 + lambda) : eta;
    const double shrink_scale = adversarial ? eta * lambda * eps : 0.0;
    const std::vector<double> v_old = v;
    const std::vector<double> f_old = fake_sum();
    const double sv = dot(aggregate, v_old);
    const double vv = dot(v_old, v_old);
    const double nd = static_cast<double>(n);

    const double h = shrink_scale > 0.0 ? shrink_scale / std::sqrt(mean_sq_norm) : 0.0;
    const std::vector<double> s_old = aggregate;
    for (std::size_t k = 0; k < dim; ++k) aggregate[k] = (1.0 - h) * s_old[k] + nd * g * v_old[k];
    mean_sq_norm = (1.0 - h) * (1.0 - h) * mean_sq_norm + 2.0 * (1.0 - h) * g * sv / nd + g * g * vv;

    auto step_user = [&](std::span<double> u, int r) {
      const double hu = shrink_scale > 0.0 ? shrink_scale / norm(u) : 0.0;
      for (std::size_t k = 0; k < dim; ++k) u[k] = (1.0 - hu) * u[k] + g * r * v_old[k];
    };
    step_user(probe, probe_r);
    for (std::size_t f = 0; f < fake_r.size(); ++f) step_user({fakes.data() + f * dim, dim}, fake_r[f]);

    const double users = nd + static_cast<double>(fake_r.size());
    const double hv = shrink_scale > 0.0 ? users * shrink_scale / std::sqrt(vv) : 0.0;
    for (std::size_t k = 0; k < dim; ++k) v[k] = v_old[k] + g * (s_old[k] + f_old[k]) - hv * v_old[k];
  }
};

struct Counts {
  std::vector<std::uint64_t> standard, adversarial, up, down;

  explicit Counts(std::size_t epochs)
      : standard(epochs + 1, 0), adversarial(epochs + 1, 0), up(epochs, 0), down(epochs, 0) {}

  void add(const Counts& o) {
    for (std::size_t e = 0; e < standard.size(); ++e) {
      standard[e] += o.standard[e];
      adversarial[e] += o.adversarial[e];
    }
    for (std::size_t e = 0; e < up.size(); ++e) {
      up[e] += o.up[e];
      down[e] += o.down[e];
    }
  }

  void record(const std::vector<int>& std_path, const std::vector<int>& adv_path) {
    for (std::size_t e = 0; e < standard.size(); ++e) {
      standard[e] += std_path[e];
      adversarial[e] += adv_path[e];
    }
    for (std::size_t e = 0; e < up.size(); ++e) {
      up[e] += adv_path[e] == 0 && adv_path[e + 1] == 1;
      down[e] += adv_path[e] == 1 && adv_path[e + 1] == 0;
    }
  }
};

struct SimulationContext {
  const GaussianConfig& cfg;
  std::vector<double> u_bar;
  const Probe& probe;
  const std::optional<PoisonModel>& poison;
  SamplerKind sampler;
};

// Runs the shared prefix then both continuations, writing per-epoch indicators.
template <class System, class Step, class Wrong>
void run_paths(System sys, const GaussianConfig& cfg, Step&& step, Wrong&& wrong, std::vector<int>& std_path,
               std::vector<int>& adv_path) {
  const std::size_t t = cfg.pretrain_epochs;
  const std::size_t k = cfg.adv_epochs;
  std_path.assign(t + k + 1, 0);
  adv_path.assign(t + k + 1, 0);
  std_path[0] = adv_path[0] = wrong(sys);
  for (std::size_t e = 1; e <= t; ++e) {
    step(sys, false);
    std_path[e] = adv_path[e] = wrong(sys);
  }
  System adv = sys;
  for (std::size_t e = t + 1; e <= t + k; ++e) {
    step(sys, false);
    std_path[e] = wrong(sys);
    step(adv, true);
    adv_path[e] = wrong(adv);
  }
}

void run_replicate(const SimulationContext& ctx, std::size_t rep, Counts& counts) {
  const auto& cfg = ctx.cfg;
  const std::size_t d = cfg.d;
  Rng rng = make_rng(mix_seed(cfg.seed, 0x5A3B1E), rep);
  const auto v0 = sample_initial_item(cfg, ctx.u_bar, rng);
  PoisonSpec fakes;
  if (ctx.poison && ctx.poison->n_prime > 0) fakes = sample_poison(*ctx.poison, d, ctx.probe, rng);

  std::vector<int> std_path, adv_path;
  if (ctx.sampler == SamplerKind::direct) {
    MeanFieldSystem sys;
    sys.n = cfg.n;
    sys.aggregate.resize(d);
    for (std::size_t k = 0; k < d; ++k) sys.aggregate[k] = static_cast<double>(cfg.n) * v0[k];
    sys.mean_sq_norm = dot(ctx.u_bar, ctx.u_bar) + static_cast<double>(d) * cfg.sigma * cfg.sigma;
    sys.probe = ctx.probe.u;
    sys.probe_r = ctx.probe.r;
    sys.fakes = fakes.fakes;
    sys.fake_r = fakes.ratings;
    sys.v = v0;
    if (!sys.fake_r.empty()) {
      const auto f = sys.fake_sum();
      const double total = static_cast<double>(cfg.n + sys.fake_r.size());
      for (std::size_t k = 0; k < d; ++k) sys.v[k] = (sys.aggregate[k] + f[k]) / total;
    }
    run_paths(
        std::move(sys), cfg,
        [&](MeanFieldSystem& s, bool adv) { s.epoch(cfg.eta, cfg.lambda, cfg.epsilon, adv); },
        [](const MeanFieldSystem& s) { return s.probe_wrong() ? 1 : 0; }, std_path, adv_path);
  } else {
    // Rebuild a population whose rated mean is exactly v0: the probe plus
    // n-1 users spread around the remaining mass.
    GaussianState s;
    s.d = d;
    s.n_genuine = cfg.n;
    s.users.resize(cfg.n * d);
    s.ratings.resize(cfg.n);
    s.v = v0;
    s.ratings[0] = ctx.probe.r;
    std::copy(ctx.probe.u.begin(), ctx.probe.u.end(), s.users.begin());
    const std::size_t others = cfg.n - 1;
    std::vector<double> dev(others * d);
    std::normal_distribution<double> normal(0.0, cfg.sigma);
    std::vector<double> dev_mean(d, 0.0);
    for (std::size_t i = 0; i < others; ++i) {
      s.ratings[i + 1] = random_rating(rng);
      for (std::size_t k = 0; k < d; ++k) {
        dev[i * d + k] = normal(rng);
        dev_mean[k] += dev[i * d + k] / static_cast<double>(others);
      }
    }
    for (std::size_t i = 0; i < others; ++i) {
      auto u = s.user(i + 1);
      const double r = s.ratings[i + 1];
      for (std::size_t k = 0; k < d; ++k) {
        const double centre = (static_cast<double>(cfg.n) * v0[k] - ctx.probe.r * ctx.probe.u[k]) /
                              static_cast<double>(others);
        u[k] = r * (centre + dev[i * d + k] - dev_mean[k]);
      }
    }
    if (fakes.n_prime() > 0) inject_poison(s, fakes);
    run_paths(
        std::move(s), cfg,
        [&](GaussianState& st, bool adv) {
          if (adv)
            adversarial_epoch(st, cfg.eta, cfg.lambda, cfg.epsilon);
          else
            standard_epoch(st, cfg.eta);
        },
        [](const GaussianState& st) { return preference(st.user(st.probe), st.v) != st.ratings[st.probe] ? 1 : 0; },
        std_path, adv_path);
  }
  counts.record(std_path, adv_path);
}

ErrorTrajectory to_trajectory(const Counts& c, std::size_t samples) {
  ErrorTrajectory t;
  t.samples = samples;
  t.standard = c.standard;
  t.adversarial = c.adversarial;
  t.adv_up = c.up;
  t.adv_down = c.down;
  return t;
}

void check_simulation_inputs(const GaussianConfig& cfg, const Probe& probe) {
  cfg.validate();
  if (probe.u.size() != cfg.d) throw UsageError("probe dimension does not match config");
  if (probe.r != 1 && probe.r != -1) throw UsageError("probe rating must be +1 or -1");
}

}  // namespace

void GaussianConfig::validate() const {
  if (d == 0) throw UsageError("dimension must be >= 1");
  if (n < 2) throw UsageError("the system needs at least 2 genuine users");
  if (!(sigma > 0.0)) throw UsageError("sigma must be > 0");
  if (!u_bar.empty()) {
    if (u_bar.size() != d) throw UsageError("u_bar length does not match dimension");
    if (!(norm(u_bar) > 0.0)) throw UsageError("u_bar must be nonzero");
  } else if (!(u_bar_norm > 0.0)) {
    throw UsageError("|u_bar| must be > 0");
  }
  if (!(eta > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be >= 0");
  if (mc_samples == 0) throw UsageError("mc_samples must be >= 1");
}

std::vector<double> GaussianConfig::resolved_u_bar() const {
  if (!u_bar.empty()) return u_bar;
  Rng rng = make_rng(seed, 0xBA5E);
  auto dir = standard_normal_vector(d, rng);
  const double len = norm(dir);
  for (double& x : dir) x *= u_bar_norm / len;
  return dir;
}

GaussianState init_system(const GaussianConfig& cfg) {
  cfg.validate();
  const auto u_bar = cfg.resolved_u_bar();
  Rng rng = make_rng(cfg.seed, 0x1A17);
  std::normal_distribution<double> normal(0.0, cfg.sigma);
  GaussianState s;
  s.d = cfg.d;
  s.n_genuine = cfg.n;
  s.users.resize(cfg.n * cfg.d);
  s.ratings.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    s.ratings[i] = random_rating(rng);
    auto u = s.user(i);
    for (std::size_t k = 0; k < cfg.d; ++k) u[k] = s.ratings[i] * u_bar[k] + normal(rng);
  }
  s.v = rated_sum(s);
  for (double& x : s.v) x /= static_cast<double>(cfg.n);
  return s;
}

std::vector<double> sample_initial_item(const GaussianConfig& cfg, std::span<const double> u_bar, Rng& rng) {
  const double spread = cfg.sigma / std::sqrt(static_cast<double>(cfg.n - 1));
  const auto z = standard_normal_vector(cfg.d, rng);
  std::vector<double> v0(cfg.d);
  for (std::size_t k = 0; k < cfg.d; ++k) v0[k] = u_bar[k] + spread * z[k];
  return v0;
}

int preference(std::span<const double> u, std::span<const double> v) { return dot(u, v) > 0.0 ? 1 : -1; }

void standard_epoch(GaussianState& s, double eta) {
  const std::vector<double> v_old = s.v;
  const auto total = rated_sum(s);
  for (std::size_t i = 0; i < s.n_users(); ++i) {
    auto u = s.user(i);
    const double step = eta * s.ratings[i];
    for (std::size_t k = 0; k < s.d; ++k) u[k] = u[k] + step * v_old[k];
  }
  for (std::size_t k = 0; k < s.d; ++k) s.v[k] = v_old[k] + eta * total[k];
  ++s.epoch;
}

void adversarial_epoch(GaussianState& s, double eta, double lambda, std::span<const double> epsilons) {
  if (epsilons.size() != s.n_users()) throw UsageError("one magnitude per user is required");
  const std::vector<double> v_old = s.v;
  const auto total = rated_sum(s);
  const double g = eta * (1.0 + lambda);
  double eps_total = 0.0;
  for (std::size_t i = 0; i < s.n_users(); ++i) {
    auto u = s.user(i);
    double h = 0.0;
    const double scale = eta * lambda * epsilons[i];
    if (scale != 0.0) {
      const double len = norm(u);
      if (!(len > 0.0)) throw NumericalError("zero-norm user embedding in adversarial update (user " + std::to_string(i) + ")");
      h = scale / len;
    }
    eps_total += epsilons[i];
    const double step = g * s.ratings[i];
    for (std::size_t k = 0; k < s.d; ++k) u[k] = (1.0 - h) * u[k] + step * v_old[k];
  }
  double hv = 0.0;
  const double item_scale = eta * lambda * eps_total;
  if (item_scale != 0.0) {
    const double len = norm(v_old);
    if (!(len > 0.0)) throw NumericalError("zero-norm item embedding in adversarial update");
    hv = item_scale / len;
  }
  for (std::size_t k = 0; k < s.d; ++k) s.v[k] = v_old[k] + g * total[k] - hv * v_old[k];
  ++s.epoch;
}

void adversarial_epoch(GaussianState& s, double eta, double lambda, double epsilon) {
  const std::vector<double> eps(s.n_users(), epsilon);
  adversarial_epoch(s, eta, lambda, eps);
}

double transform_factor(std::size_t t, double eta, std::size_t n) {
  if (t == 0) return 1.0;
  const double ne = static_cast<double>(n) * eta;
  if (t == 1) return 1.0 + ne;
  double a = 1.0, b = ne, c = ne * eta;
  for (std::size_t k = 2; k <= t - 1; ++k) {
    const double a_next = a + c;
    const double b_next = ne * a + b;
    const double c_next = ne * eta * a + c;
    a = a_next;
    b = b_next;
    c = c_next;
  }
  return (1.0 + ne) * a + b + c;
}

double item_scale_factor(const GaussianState& s, std::span<const double> v0) {
  const double v0_sq = dot(v0, v0);
  if (!(v0_sq > 0.0)) throw UsageError("reference item embedding must be nonzero");
  const double scale = dot(s.v, v0) / v0_sq;
  double residual = 0.0;
  for (std::size_t k = 0; k < s.d; ++k) residual += (s.v[k] - scale * v0[k]) * (s.v[k] - scale * v0[k]);
  if (std::sqrt(residual) > 1e-8 * norm(s.v))
    throw NumericalError("item embedding is not collinear with its initial value");
  return scale;
}

void inject_poison(GaussianState& s, const PoisonSpec& spec) {
  if (s.n_users() != s.n_genuine) throw UsageError("state already contains fake users");
  if (s.epoch != 0) throw UsageError("poison must be injected before training");
  if (spec.fakes.size() != spec.n_prime() * s.d) throw UsageError("fake embedding matrix has the wrong shape");
  for (std::size_t f = 0; f < spec.n_prime(); ++f) {
    if (spec.ratings[f] != 1 && spec.ratings[f] != -1) throw UsageError("fake ratings must be +1 or -1");
    for (std::size_t k = 0; k < s.d; ++k)
      if (std::abs(spec.fakes[f * s.d + k]) > spec.alpha)
        throw DataError("fake user " + std::to_string(f) + " exceeds the infinity-norm bound " +
                        std::to_string(spec.alpha));
  }
  if (spec.n_prime() == 0) return;
  const double n = static_cast<double>(s.n_genuine);
  const double total = n + static_cast<double>(spec.n_prime());
  std::vector<double> v(s.d);
  for (std::size_t k = 0; k < s.d; ++k) v[k] = n * s.v[k];
  for (std::size_t f = 0; f < spec.n_prime(); ++f)
    for (std::size_t k = 0; k < s.d; ++k) v[k] += spec.ratings[f] * spec.fakes[f * s.d + k];
  for (std::size_t k = 0; k < s.d; ++k) s.v[k] = v[k] / total;
  s.users.insert(s.users.end(), spec.fakes.begin(), spec.fakes.end());
  s.ratings.insert(s.ratings.end(), spec.ratings.begin(), spec.ratings.end());
}

Probe make_probe(const GaussianConfig& cfg, ProbePolicy policy) {
  cfg.validate();
  const auto u_bar = cfg.resolved_u_bar();
  Rng rng = make_rng(cfg.seed, 0x960BE);
  Probe p;
  p.r = random_rating(rng);
  p.u.resize(cfg.d);
  if (policy == ProbePolicy::sampled) {
    const auto z = standard_normal_vector(cfg.d, rng);
    for (std::size_t k = 0; k < cfg.d; ++k) p.u[k] = p.r * u_bar[k] + cfg.sigma * z[k];
    return p;
  }
  // r*u(0) = -eta * sum_{j<=t} M(j) u_bar + |u_bar| w with w a unit vector
  // orthogonal to u_bar, so r*u(t+1) is orthogonal to the noise-free v(t+1).
  const double ub_sq = dot(u_bar, u_bar);
  std::vector<double> w;
  double w_len = 0.0;
  while (!(w_len > 1e-6)) {
    w = standard_normal_vector(cfg.d, rng);
    const double proj = dot(w, u_bar) / ub_sq;
    for (std::size_t k = 0; k < cfg.d; ++k) w[k] -= proj * u_bar[k];
    w_len = norm(w);
    if (cfg.d == 1) break;
  }
  double drift = 0.0;
  for (std::size_t j = 0; j <= cfg.pretrain_epochs; ++j) drift += transform_factor(j, cfg.eta, cfg.n);
  drift *= cfg.eta;
  const double ub = std::sqrt(ub_sq);
  for (std::size_t k = 0; k < cfg.d; ++k) {
    const double orth = w_len > 1e-6 ? ub * w[k] / w_len : 0.0;
    p.u[k] = p.r * (-drift * u_bar[k] + orth);
  }
  return p;
}

PoisonSpec sample_poison(const PoisonModel& model, std::size_t d, const Probe& probe, Rng& rng) {
  PoisonSpec spec;
  spec.alpha = model.alpha;
  spec.fakes.resize(model.n_prime * d);
  spec.ratings.resize(model.n_prime);
  std::uniform_real_distribution<double> entry(-model.alpha, model.alpha);
  for (std::size_t f = 0; f < model.n_prime; ++f) {
    double align = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      spec.fakes[f * d + k] = entry(rng);
      align += spec.fakes[f * d + k] * probe.r * probe.u[k];
    }
    spec.ratings[f] = align > 0.0 ? -1 : 1;
  }
  return spec;
}

double binomial_se(std::uint64_t hits, std::size_t samples) {
  if (samples == 0) return 0.0;
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
}

double ErrorTrajectory::rate_standard(std::size_t e) const {
  return static_cast<double>(standard.at(e)) / static_cast<double>(samples);
}
double ErrorTrajectory::rate_adversarial(std::size_t e) const {
  return static_cast<double>(adversarial.at(e)) / static_cast<double>(samples);
}
double ErrorTrajectory::se_standard(std::size_t e) const { return binomial_se(standard.at(e), samples); }
double ErrorTrajectory::se_adversarial(std::size_t e) const { return binomial_se(adversarial.at(e), samples); }

double ErrorTrajectory::reduction(std::size_t e) const {
  return (static_cast<double>(adv_down.at(e)) - static_cast<double>(adv_up.at(e))) / static_cast<double>(samples);
}

double ErrorTrajectory::reduction_se(std::size_t e) const {
  const double n = static_cast<double>(samples);
  const double m = reduction(e);
  const double second = (static_cast<double>(adv_down.at(e)) + static_cast<double>(adv_up.at(e))) / n;
  return std::sqrt(std::max(0.0, second - m * m) / n);
}

ErrorTrajectory simulate_errors_serial(const GaussianConfig& cfg, const Probe& probe,
                                       const std::optional<PoisonModel>& poison, SamplerKind sampler) {
  check_simulation_inputs(cfg, probe);
  const SimulationContext ctx{cfg, cfg.resolved_u_bar(), probe, poison, sampler};
  Counts counts(cfg.pretrain_epochs + cfg.adv_epochs);
  for (std::size_t rep = 0; rep < cfg.mc_samples; ++rep) run_replicate(ctx, rep, counts);
  return to_trajectory(counts, cfg.mc_samples);
}

ErrorTrajectory simulate_errors(const GaussianConfig& cfg, const Probe& probe, const std::optional<PoisonModel>& poison,
                                SamplerKind sampler) {
  check_simulation_inputs(cfg, probe);
  const SimulationContext ctx{cfg, cfg.resolved_u_bar(), probe, poison, sampler};
  const std::size_t epochs = cfg.pretrain_epochs + cfg.adv_epochs;
  Counts total(epochs);
  std::exception_ptr failure;
#pragma omp parallel
  {
    Counts local(epochs);
#pragma omp for schedule(static)
    for (std::ptrdiff_t rep = 0; rep < static_cast<std::ptrdiff_t>(cfg.mc_samples); ++rep) {
      try {
        run_replicate(ctx, static_cast<std::size_t>(rep), local);
      } catch (...) {
#pragma omp critical(pamacf_mc_failure)
        if (!failure) failure = std::current_exception();
      }
    }
#pragma omp critical(pamacf_mc_reduce)
    total.add(local);
  }
  if (failure) std::rethrow_exception(failure);
  return to_trajectory(total, cfg.mc_samples);
}

ErrorEstimate estimate_error(const GaussianConfig& cfg, TrainingMode mode, const Probe& probe,
                             const std::optional<PoisonModel>& poison, SamplerKind sampler) {
  const auto traj = simulate_errors(cfg, probe, poison, sampler);
  if (mode == TrainingMode::standard) {
    const std::size_t e = cfg.pretrain_epochs;
    return {traj.rate_standard(e), traj.se_standard(e)};
  }
  const std::size_t e = cfg.pretrain_epochs + cfg.adv_epochs;
  return {traj.rate_adversarial(e), traj.se_adversarial(e)};
}

ReferencePath reference_path(const GaussianConfig& cfg, const Probe& probe) {
  cfg.validate();
  const auto u_bar = cfg.resolved_u_bar();
  GaussianState s;
  s.d = cfg.d;
  s.n_genuine = cfg.n;
  s.ratings.assign(cfg.n, 1);
  s.users.resize(cfg.n * cfg.d);
  for (std::size_t i = 0; i < cfg.n; ++i) std::copy(u_bar.begin(), u_bar.end(), s.user(i).begin());
  s.v = u_bar;

  std::vector<double> pu = probe.u;
  ReferencePath path;
  const double n = static_cast<double>(cfg.n);
  auto record = [&] {
    path.item_scale.push_back(item_scale_factor(s, u_bar));
    path.probe_norm.push_back(norm(pu));
    path.item_shrink.push_back(n * cfg.eta * cfg.lambda * cfg.epsilon / norm(s.v));
  };
  record();
  const std::size_t total = cfg.pretrain_epochs + cfg.adv_epochs;
  for (std::size_t e = 0; e < total; ++e) {
    const bool adv = e >= cfg.pretrain_epochs;
    const double g = adv ? cfg.eta * (1.0 + cfg.lambda) : cfg.eta;
    const double scale = adv ? cfg.eta * cfg.lambda * cfg.epsilon : 0.0;
    const double h = scale != 0.0 ? scale / norm(pu) : 0.0;
    for (std::size_t k = 0; k < cfg.d; ++k) pu[k] = (1.0 - h) * pu[k] + g * probe.r * s.v[k];
    if (adv)
      adversarial_epoch(s, cfg.eta, cfg.lambda, cfg.epsilon);
    else
      standard_epoch(s, cfg.eta);
    record();
  }
  return path;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_cdf_diff(double a, double b) {
  const double r = 1.0 / std::sqrt(2.0);
  if (a >= 0.0 && b >= 0.0) return 0.5 * (std::erfc(a * r) - std::erfc(b * r));
  if (a <= 0.0 && b <= 0.0) return 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
  return normal_cdf(b) - normal_cdf(a);
}

double BoundsInput::beta() const {
  return static_cast<double>(n_prime) / static_cast<double>(n) * std::sqrt(static_cast<double>(d)) * alpha +
         u_bar_norm;
}

double BoundsInput::tau() const {
  return 2.0 * static_cast<double>(n) * static_cast<double>(n_prime) * alpha * static_cast<double>(u_bar_l0);
}

Bounds theorem_bounds(const BoundsInput& in, bool poisoned) {
  if (in.n < 2 || !(in.sigma > 0.0)) throw UsageError("bounds need n >= 2 and sigma > 0");
  Bounds b;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!(in.user_norm > 0.0)) {
    b.applicable = false;
    b.reason = "zero user norm";
    b.lower = b.upper = nan;
    return b;
  }
  const double shrink = in.eta * in.lambda * in.epsilon / in.user_norm;
  if (!(1.0 - shrink > 0.0)) {
    b.applicable = false;
    b.reason = "gamma denominator <= 0";
    b.lower = b.upper = nan;
    return b;
  }
  const double cap_scale = in.eta * in.lambda;
  if (cap_scale > 0.0 && !(in.epsilon < std::min(in.user_norm, in.u_bar_norm) / cap_scale)) {
    b.applicable = false;
    b.reason = "epsilon at or above cap";
  }
  b.gamma = 1.0 / (1.0 - shrink);
  b.psi = (1.0 + in.lambda) * b.gamma * in.item_scale / in.user_norm;

  const double n = static_cast<double>(in.n);
  const double np = static_cast<double>(in.n_prime);
  const double d = static_cast<double>(in.d);
  const double s2 = in.sigma * in.sigma;
  const double scale = std::sqrt(n - 1.0) / in.sigma;
  const double ub2 = in.u_bar_norm * in.u_bar_norm;
  double start = in.u_bar_norm, low_coef, up_coef;
  if (!poisoned) {
    low_coef = up_coef = ub2 + d * s2 / (n - 1.0);
  } else {
    start = in.beta();
    const double tau = in.tau();
    const double noise = n * d * s2 / ((n - 1.0) * (n + np));
    low_coef = (n * n * ub2 - tau) / (n * (n + np)) + noise;
    up_coef = (n * n * ub2 + np * np * d * in.alpha * in.alpha + tau) / (n * (n + np)) + noise;
  }
  b.lower = normal_cdf_diff(scale * start, scale * (start + in.eta * low_coef * b.psi));
  b.upper = std::erf(scale * in.eta / 2.0 * up_coef * b.psi / std::sqrt(2.0));
  return b;
}

}  // namespace pamacf::theory
