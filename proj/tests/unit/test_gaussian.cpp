#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "pamacf/gaussian.hpp"

using namespace pamacf;
using namespace pamacf::theory;

namespace {

GaussianConfig small_config() {
  GaussianConfig cfg;
  cfg.n = 50;
  cfg.d = 4;
  cfg.sigma = 0.05;
  cfg.eta = 0.01;
  cfg.seed = 17;
  return cfg;
}

double vnorm(std::span<const double> x) { return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0)); }

}  // namespace

TEST_SUITE("gaussian-theory") {
  TEST_CASE("initial system") {
    auto cfg = small_config();
    cfg.sigma = 1e-13;
    const auto s = init_system(cfg);
    const auto u_bar = cfg.resolved_u_bar();
    CHECK(vnorm(u_bar) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < s.n_users(); ++i)
      for (std::size_t k = 0; k < cfg.d; ++k) CHECK(std::abs(s.user(i)[k] - s.ratings[i] * u_bar[k]) < 1e-11);
    for (std::size_t k = 0; k < cfg.d; ++k) CHECK(std::abs(s.v[k] - u_bar[k]) < 1e-11);

    const auto a = init_system(small_config()), b = init_system(small_config());
    CHECK(a.users == b.users);
    CHECK(a.ratings == b.ratings);
    CHECK(a.v == b.v);
    for (int r : a.ratings) CHECK((r == 1 || r == -1));
  }

  TEST_CASE("preference") {
    const std::vector<double> e1{1, 0}, e2{0, 1}, m1{-1, 0};
    CHECK(preference(e1, e1) == 1);
    CHECK(preference(e1, e2) == -1);
    CHECK(preference(m1, e1) == -1);
  }

  TEST_CASE("epoch update identities") {
    const auto s0 = init_system(small_config());
    auto s = s0;
    standard_epoch(s, 0.0);
    CHECK(s.users == s0.users);
    CHECK(s.v == s0.v);

    auto a = s0, b = s0;
    standard_epoch(a, 0.02);
    adversarial_epoch(b, 0.02, 0.0, 0.7);
    CHECK(a.users == b.users);
    CHECK(a.v == b.v);

    auto c = s0, e = s0;
    adversarial_epoch(c, 0.02, 0.5, 0.0);
    standard_epoch(e, 0.03);
    for (std::size_t k = 0; k < c.users.size(); ++k) CHECK(c.users[k] == doctest::Approx(e.users[k]).epsilon(1e-13));
    for (std::size_t k = 0; k < c.v.size(); ++k) CHECK(c.v[k] == doctest::Approx(e.v[k]).epsilon(1e-13));
  }

  TEST_CASE("two-user two-dimensional adversarial step by hand") {
    GaussianState s;
    s.d = 2;
    s.n_genuine = 2;
    s.users = {3, 4, 1, 0};
    s.ratings = {1, -1};
    s.v = {0, 2};
    const double eta = 0.1, lambda = 0.5, eps = 0.2;
    adversarial_epoch(s, eta, lambda, eps);
    // user 0: |u|=5, shrink 0.1*0.5*0.2/5 = 0.002, cross 0.15 * (+1) * (0,2)
    CHECK(s.users[0] == doctest::Approx(3 * 0.998).epsilon(1e-12));
    CHECK(s.users[1] == doctest::Approx(4 * 0.998 + 0.3).epsilon(1e-12));
    // user 1: |u|=1, shrink 0.01, cross 0.15 * (-1) * (0,2)
    CHECK(s.users[2] == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(s.users[3] == doctest::Approx(-0.3).epsilon(1e-12));
    // sum r u = (3-1, 4-0) = (2, 4); item shrink 2*0.1*0.5*0.2/2 = 0.01
    CHECK(s.v[0] == doctest::Approx(0.15 * 2).epsilon(1e-12));
    CHECK(s.v[1] == doctest::Approx(2 + 0.15 * 4 - 0.02).epsilon(1e-12));
  }

  TEST_CASE("zero-norm embeddings are rejected in the adversarial update") {
    GaussianState s;
    s.d = 2;
    s.n_genuine = 2;
    s.users = {0, 0, 1, 0};
    s.ratings = {1, 1};
    s.v = {1, 1};
    CHECK_THROWS_AS(adversarial_epoch(s, 0.1, 1.0, 0.1), NumericalError);
  }

  TEST_CASE("transform factor") {
    CHECK(transform_factor(0, 0.3, 7) == 1.0);
    CHECK(transform_factor(1, 0.01, 200) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(transform_factor(2, 0.1, 3) == doctest::Approx(1.63).epsilon(1e-14));
    for (std::size_t n : {2, 10, 300})
      for (double eta : {0.001, 0.02})
        for (std::size_t t = 0; t <= 20; ++t)
          CHECK(transform_factor(t, eta, n) == doctest::Approx(oracle::item_scale(t, eta, n)).epsilon(1e-12));
  }

  TEST_CASE("item scale follows the transform factor under standard training") {
    for (std::size_t n : {2, 3, 40}) {
      auto cfg = small_config();
      cfg.n = n;
      auto s = init_system(cfg);
      const auto v0 = s.v;
      CHECK(item_scale_factor(s, v0) == 1.0);
      standard_epoch(s, cfg.eta);
      CHECK(item_scale_factor(s, v0) == doctest::Approx(1.0 + n * cfg.eta).epsilon(1e-12));
      for (std::size_t t = 2; t <= 15; ++t) {
        standard_epoch(s, cfg.eta);
        const double m = transform_factor(t, cfg.eta, n);
        CHECK(std::abs(item_scale_factor(s, v0) - m) <= 1e-9 * m);
      }
    }
    auto s = init_system(small_config());
    const auto v0 = s.v;
    s.v[0] += 0.5;
    CHECK_THROWS_AS(item_scale_factor(s, v0), NumericalError);
  }

  TEST_CASE("poison injection") {
    const auto clean = init_system(small_config());
    auto s = clean;
    inject_poison(s, PoisonSpec{0.1, {}, {}});
    CHECK(s.v == clean.v);

    s = clean;
    inject_poison(s, PoisonSpec{0.1, std::vector<double>(3 * 4, 0.0), {1, -1, 1}});
    for (std::size_t k = 0; k < 4; ++k) CHECK(s.v[k] == doctest::Approx(50.0 / 53.0 * clean.v[k]).epsilon(1e-14));
    CHECK(s.n_users() == 53);

    GaussianState two;
    two.d = 2;
    two.n_genuine = 2;
    two.users = {0.3, 0.1, -0.2, 0.2};
    two.ratings = {1, -1};
    two.v = {(0.3 + 0.2) / 2, (0.1 - 0.2) / 2};
    // two fakes copying the genuine contributions with the opposite sign
    inject_poison(two, PoisonSpec{0.3, {0.3, 0.1, -0.2, 0.2}, {-1, 1}});
    CHECK(std::abs(two.v[0]) < 1e-15);
    CHECK(std::abs(two.v[1]) < 1e-15);

    s = clean;
    CHECK_THROWS_AS(inject_poison(s, PoisonSpec{0.1, {0.2, 0, 0, 0}, {1}}), DataError);
  }

  TEST_CASE("unit projections of the initial item draw have variance sigma^2/(n-1)") {
    auto cfg = small_config();
    cfg.n = 101;
    cfg.sigma = 0.3;
    const auto u_bar = cfg.resolved_u_bar();
    Rng rng = make_rng(5);
    std::vector<double> w{0.5, -0.5, 0.5, 0.5};
    double sum = 0.0, sum_sq = 0.0;
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) {
      const auto v0 = sample_initial_item(cfg, u_bar, rng);
      double x = 0.0;
      for (std::size_t c = 0; c < 4; ++c) x += w[c] * (v0[c] - u_bar[c]);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / draws;
    const double var = (sum_sq - draws * mean * mean) / (draws - 1);
    CHECK(std::abs(var / (0.09 / 100.0) - 1.0) < 0.05);
  }

  TEST_CASE("error estimates at the degenerate limits") {
    auto cfg = small_config();
    cfg.sigma = 1e-9;
    cfg.pretrain_epochs = 0;
    cfg.adv_epochs = 0;
    cfg.mc_samples = 200;
    const auto u_bar = cfg.resolved_u_bar();
    Probe aligned{u_bar, 1};
    CHECK(estimate_error(cfg, TrainingMode::standard, aligned).p == 0.0);
    Probe opposed{u_bar, -1};
    CHECK(estimate_error(cfg, TrainingMode::standard, opposed).p == 1.0);
  }

  TEST_CASE("doubling the sample count shrinks the standard error by about 1/sqrt(2)") {
    auto cfg = small_config();
    cfg.n = 200;
    cfg.d = 8;
    cfg.sigma = 0.05;
    cfg.pretrain_epochs = 5;
    cfg.adv_epochs = 0;
    const auto probe = make_probe(cfg, ProbePolicy::boundary);
    cfg.pretrain_epochs = 6;  // the boundary probe sits on the decision boundary one epoch after t
    cfg.mc_samples = 4000;
    const auto a = estimate_error(cfg, TrainingMode::standard, probe);
    cfg.mc_samples = 8000;
    const auto b = estimate_error(cfg, TrainingMode::standard, probe);
    REQUIRE(a.p > 0.05);
    REQUIRE(a.p < 0.95);
    CHECK(b.se / a.se == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
  }

  TEST_CASE("direct and population samplers agree within 3 combined standard errors") {
    auto cfg = small_config();
    cfg.n = 200;
    cfg.d = 8;
    cfg.sigma = 0.05;
    cfg.pretrain_epochs = 5;
    cfg.adv_epochs = 2;
    cfg.lambda = 1.0;
    cfg.epsilon = 0.5;
    cfg.mc_samples = 3000;
    const auto probe = make_probe(cfg, ProbePolicy::boundary);
    const auto direct = simulate_errors(cfg, probe, std::nullopt, SamplerKind::direct);
    const auto population = simulate_errors(cfg, probe, std::nullopt, SamplerKind::population);
    for (std::size_t e = 0; e < direct.standard.size(); ++e) {
      const double tol = 3.0 * std::hypot(direct.se_standard(e), population.se_standard(e)) + 1.0 / 3000.0;
      CHECK(std::abs(direct.rate_standard(e) - population.rate_standard(e)) <= tol);
      const double tol_adv = 3.0 * std::hypot(direct.se_adversarial(e), population.se_adversarial(e)) + 1.0 / 3000.0;
      CHECK(std::abs(direct.rate_adversarial(e) - population.rate_adversarial(e)) <= tol_adv);
    }
  }

  TEST_CASE("parallel simulation equals the serial one and is deterministic") {
    auto cfg = small_config();
    cfg.mc_samples = 1500;
    cfg.epsilon = 0.3;
    const auto probe = make_probe(cfg, ProbePolicy::sampled);
    const PoisonModel poison{3, 0.05};
    for (auto sampler : {SamplerKind::direct, SamplerKind::population}) {
      const auto a = simulate_errors(cfg, probe, poison, sampler);
      const auto b = simulate_errors_serial(cfg, probe, poison, sampler);
      const auto c = simulate_errors(cfg, probe, poison, sampler);
      CHECK(a.standard == b.standard);
      CHECK(a.adversarial == b.adversarial);
      CHECK(a.adv_up == b.adv_up);
      CHECK(a.adv_down == b.adv_down);
      CHECK(a.standard == c.standard);
    }
  }

  TEST_CASE("sampled fakes respect the bound and oppose the probe") {
    const Probe probe{{1, 2, -1}, 1};
    Rng rng = make_rng(3);
    const auto spec = sample_poison(PoisonModel{20, 0.1}, 3, probe, rng);
    CHECK(spec.n_prime() == 20);
    for (std::size_t f = 0; f < 20; ++f) {
      double align = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(spec.fakes[f * 3 + k]) <= 0.1);
        align += spec.fakes[f * 3 + k] * probe.u[k];
      }
      CHECK(spec.ratings[f] * align <= 0.0);
    }
  }

  TEST_CASE("normal cdf differences stay accurate in the tails") {
    CHECK(normal_cdf(0.0) == 0.5);
    const double tail = normal_cdf_diff(10.0, 11.0);
    CHECK(tail > 0.0);
    CHECK(tail == doctest::Approx(7.619661958e-24).epsilon(1e-8));
    CHECK(normal_cdf_diff(-11.0, -10.0) == doctest::Approx(tail).epsilon(1e-12));
    CHECK(normal_cdf_diff(-1.0, 1.0) == doctest::Approx(0.682689492137086).epsilon(1e-12));
  }

  TEST_CASE("bounds: lambda 0, degenerate sandwich, inapplicable constraint") {
    BoundsInput in;
    in.n = 200;
    in.d = 8;
    in.sigma = 0.05;
    in.u_bar_norm = 1.0;
    in.u_bar_l0 = 8;
    in.eta = 0.01;
    in.lambda = 0.0;
    in.epsilon = 0.0;
    in.item_scale = 3.2;
    in.user_norm = 1.4;
    const auto b = theorem_bounds(in, false);
    const double psi = in.item_scale / in.user_norm;
    CHECK(b.psi == doctest::Approx(psi).epsilon(1e-15));
    const double s = std::sqrt(199.0) / 0.05;
    const double a = 1.0 + 8 * 0.0025 / 199.0;
    CHECK(b.lower == doctest::Approx(normal_cdf(s * (1.0 + 0.01 * a * psi)) - normal_cdf(s * 1.0)).epsilon(1e-9));
    CHECK(b.lower >= 0.0);
    CHECK(b.upper >= b.lower);

    in.item_scale = 0.0;
    const auto zero = theorem_bounds(in, false);
    CHECK(zero.lower == 0.0);
    CHECK(zero.upper == 0.0);

    in.item_scale = 3.2;
    in.lambda = 1.0;
    in.epsilon = 200.0;
    const auto bad = theorem_bounds(in, false);
    CHECK_FALSE(bad.applicable);
  }

  TEST_CASE("poisoned bounds without fakes reduce to the clean bounds") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
      BoundsInput in;
      in.n = 2 + static_cast<std::size_t>(unit(rng) * 1000);
      in.d = 1 + static_cast<std::size_t>(unit(rng) * 40);
      in.sigma = 0.01 + 0.2 * unit(rng);
      in.u_bar_norm = 0.5 + unit(rng);
      in.u_bar_l0 = in.d;
      in.eta = 0.001 + 0.05 * unit(rng);
      in.lambda = 2.0 * unit(rng);
      in.user_norm = 0.2 + 2.0 * unit(rng);
      in.epsilon = 0.5 * unit(rng) * in.user_norm / std::max(in.eta * in.lambda, 1e-9);
      in.item_scale = 1.0 + 5.0 * unit(rng);
      const auto clean = theorem_bounds(in, false);
      const auto poisoned = theorem_bounds(in, true);
      CHECK(std::abs(clean.lower - poisoned.lower) <= 1e-12);
      CHECK(std::abs(clean.upper - poisoned.upper) <= 1e-12);
    }
  }
}
