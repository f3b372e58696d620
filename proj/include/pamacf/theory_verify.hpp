#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pamacf/gaussian.hpp"

namespace pamacf::theory {

/// One verification setting; |u_bar| is fixed at 1 so sigma_ratio is sigma itself.
struct GridPoint {
  std::size_t n = 200;
  std::size_t d = 8;
  double sigma_ratio = 0.02;
  double eta = 0.01;
  double lambda = 1.0;
  double epsilon_fraction = 0.5;  // epsilon as a fraction of the cap min(|u_t|, |u_bar|)/(eta*lambda)
  std::size_t t = 5;
  std::size_t k = 3;
};

/// n in {200, 1000} x d in {8, 32} x sigma in {0.02, 0.1} x lambda in {0.5, 1}.
std::vector<GridPoint> default_grid();

/// CSV with header `n,d,sigma_ratio,eta,lambda,epsilon_fraction,t,k`.
std::vector<GridPoint> parse_grid_csv(std::istream& in, std::string_view source = "<grid>");

struct VerifyOptions {
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 2024;
  ProbePolicy probe = ProbePolicy::boundary;
  SamplerKind sampler = SamplerKind::direct;
  double fake_fraction = 0.05;  // n' = round(fake_fraction * n)
  double alpha_scale = 0.1;     // alpha = alpha_scale * |u_bar| / sqrt(d)
  double min_ratio_comparison = 10.0;  // |u_bar|/sigma needed for theorems 1-2
  double min_ratio_bounds = 20.0;      // |u_bar|/sigma needed for theorems 3-4
};

enum class Verdict { pass, fail, skip };
std::string_view to_string(Verdict v);

struct VerificationRow {
  int theorem = 1;
  GridPoint point;
  double sigma = 0.0;
  double epsilon = 0.0;
  std::size_t k = 0;  // adversarial epochs completed before the measured one (theorems 3-4)
  double err_std = 0.0;
  double err_adv = 0.0;
  double se = 0.0;
  double lower = 0.0;  // NaN for theorems 1-2
  double upper = 0.0;
  double delta = 0.0;
  Verdict verdict = Verdict::skip;
  std::string note;
  // Reference-path diagnostics, not written to the CSV.
  double item_scale = 0.0;
  double user_norm = 0.0;
  double item_shrink = 0.0;
  double gamma = 1.0;
  double psi = 0.0;
};

struct VerificationReport {
  std::vector<VerificationRow> rows;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;

  double pass_rate() const;  // over applicable rows; 0 when none
};

/// Theorems 1-2: err_std(t+1) - err_adv(t+1) > 2 SE (or |diff| <= 2 SE when lambda = 0).
/// Theorems 3-4: lower - 3 SE <= Delta(t+j+1) <= upper + 3 SE for j = 0..k-1.
/// Odd theorems run on clean systems, even ones on poisoned systems.
VerificationReport verify_theorem(int theorem, const std::vector<GridPoint>& grid, const VerifyOptions& opts);

void write_verification_csv(std::ostream& out, const VerificationReport& report);
std::string summary_line(const VerificationReport& report);

}  // namespace pamacf::theory
