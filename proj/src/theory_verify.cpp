#include "pamacf/theory_verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pamacf::theory {

namespace {

constexpr const char* kGridHeader = "n,d,sigma_ratio,eta,lambda,epsilon_fraction,t,k";

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_field(const std::string& text, std::string_view source, std::size_t line, const char* name) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (!in || !(in >> std::ws).eof())
    throw DataError(std::string(source) + ": row " + std::to_string(line) + ": bad value '" + text + "' for " + name);
  return value;
}

void add(VerificationReport& report, VerificationRow row) {
  switch (row.verdict) {
    case Verdict::pass: ++report.passed; break;
    case Verdict::fail: ++report.failed; break;
    case Verdict::skip: ++report.skipped; break;
  }
  report.rows.push_back(std::move(row));
}

struct PointSetup {
  GaussianConfig cfg;
  Probe probe;
  ReferencePath ref;
  double cap = 0.0;
};

PointSetup setup_point(const GridPoint& p, const VerifyOptions& opts) {
  PointSetup s;
  s.cfg.n = p.n;
  s.cfg.d = p.d;
  s.cfg.sigma = p.sigma_ratio;
  s.cfg.u_bar_norm = 1.0;
  s.cfg.eta = p.eta;
  s.cfg.lambda = p.lambda;
  s.cfg.pretrain_epochs = p.t;
  s.cfg.adv_epochs = p.k;
  s.cfg.mc_samples = opts.mc_samples;
  s.cfg.seed = opts.seed;
  s.cfg.epsilon = 0.0;
  s.cfg.validate();
  s.probe = make_probe(s.cfg, opts.probe);
  const double ut = reference_path(s.cfg, s.probe).probe_norm.at(p.t);
  const double scale = p.eta * p.lambda;
  s.cap = scale > 0.0 ? std::min(ut, s.cfg.u_bar_norm) / scale : std::numeric_limits<double>::infinity();
  s.cfg.epsilon = scale > 0.0 ? p.epsilon_fraction * s.cap : 0.0;
  s.ref = reference_path(s.cfg, s.probe);
  return s;
}

VerificationRow base_row(int theorem, const GridPoint& p, const PointSetup& s) {
  VerificationRow row;
  row.theorem = theorem;
  row.point = p;
  row.sigma = s.cfg.sigma;
  row.epsilon = s.cfg.epsilon;
  row.lower = row.upper = std::numeric_limits<double>::quiet_NaN();
  return row;
}

void verify_comparison(int theorem, const GridPoint& p, const VerifyOptions& opts, VerificationReport& report) {
  const PointSetup s = setup_point(p, opts);
  VerificationRow row = base_row(theorem, p, s);
  row.k = 0;
  row.item_scale = s.ref.item_scale.at(p.t);
  row.user_norm = s.ref.probe_norm.at(p.t);
  row.item_shrink = s.ref.item_shrink.at(p.t);
  if (p.k == 0) {
    row.note = "no adversarial epoch";
  } else if (1.0 / p.sigma_ratio < opts.min_ratio_comparison) {
    row.note = "|u_bar|/sigma below " + std::to_string(opts.min_ratio_comparison);
  } else if (p.lambda > 0.0 && !(s.cfg.epsilon < s.cap)) {
    row.note = "epsilon at or above cap";
  }
  if (!row.note.empty()) {
    add(report, row);
    return;
  }
  std::optional<PoisonModel> poison;
  if (theorem == 2) poison = PoisonModel{static_cast<std::size_t>(std::llround(opts.fake_fraction * p.n)),
                                         opts.alpha_scale / std::sqrt(static_cast<double>(p.d))};
  const auto traj = simulate_errors(s.cfg, s.probe, poison, opts.sampler);
  const std::size_t e = p.t + 1;
  row.err_std = traj.rate_standard(e);
  row.err_adv = traj.rate_adversarial(e);
  const double floor = 1.0 / static_cast<double>(traj.samples);
  row.se = std::max(std::hypot(traj.se_standard(e), traj.se_adversarial(e)), floor);
  row.delta = row.err_std - row.err_adv;
  if (p.lambda == 0.0) {
    row.note = "sanity";
    row.verdict = std::abs(row.delta) <= 2.0 * row.se ? Verdict::pass : Verdict::fail;
  } else {
    row.verdict = row.delta > 2.0 * row.se ? Verdict::pass : Verdict::fail;
  }
  add(report, row);
}

void verify_bounds(int theorem, const GridPoint& p, const VerifyOptions& opts, VerificationReport& report) {
  const PointSetup s = setup_point(p, opts);
  const bool poisoned = theorem == 4;
  const std::size_t n_prime = poisoned ? static_cast<std::size_t>(std::llround(opts.fake_fraction * p.n)) : 0;
  const double alpha = poisoned ? opts.alpha_scale / std::sqrt(static_cast<double>(p.d)) : 0.0;
  const auto u_bar = s.cfg.resolved_u_bar();
  const auto l0 = static_cast<std::size_t>(std::count_if(u_bar.begin(), u_bar.end(), [](double x) { return x != 0.0; }));

  const bool ratio_ok = 1.0 / p.sigma_ratio >= opts.min_ratio_bounds;
  std::optional<ErrorTrajectory> traj;
  if (ratio_ok && p.k > 0) {
    std::optional<PoisonModel> poison;
    if (poisoned) poison = PoisonModel{n_prime, alpha};
    traj = simulate_errors(s.cfg, s.probe, poison, opts.sampler);
  }
  for (std::size_t j = 0; j < p.k; ++j) {
    const std::size_t e = p.t + j;
    VerificationRow row = base_row(theorem, p, s);
    row.k = j;
    row.item_scale = s.ref.item_scale.at(e);
    row.user_norm = s.ref.probe_norm.at(e);
    row.item_shrink = s.ref.item_shrink.at(e);
    if (!ratio_ok) {
      row.note = "|u_bar|/sigma below " + std::to_string(opts.min_ratio_bounds);
      add(report, row);
      continue;
    }
    BoundsInput in;
    in.n = p.n;
    in.n_prime = n_prime;
    in.d = p.d;
    in.sigma = s.cfg.sigma;
    in.u_bar_norm = s.cfg.u_bar_norm;
    in.u_bar_l0 = l0;
    in.eta = p.eta;
    in.lambda = p.lambda;
    in.epsilon = s.cfg.epsilon;
    in.alpha = alpha;
    in.item_scale = row.item_scale;
    in.user_norm = row.user_norm;
    const Bounds b = theorem_bounds(in, poisoned);
    row.lower = b.lower;
    row.upper = b.upper;
    row.gamma = b.gamma;
    row.psi = b.psi;
    row.err_std = traj->rate_standard(e + 1);
    row.err_adv = traj->rate_adversarial(e + 1);
    row.delta = traj->reduction(e);
    row.se = std::max(traj->reduction_se(e), 1.0 / static_cast<double>(traj->samples));
    if (!b.applicable) {
      row.note = b.reason;
    } else {
      const bool inside = b.lower - 3.0 * row.se <= row.delta && row.delta <= b.upper + 3.0 * row.se;
      row.verdict = inside ? Verdict::pass : Verdict::fail;
    }
    add(report, row);
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (std::size_t n : {200, 1000})
    for (std::size_t d : {8, 32})
      for (double sigma : {0.02, 0.1})
        for (double lambda : {0.5, 1.0}) {
          GridPoint p;
          p.n = n;
          p.d = d;
          p.sigma_ratio = sigma;
          p.lambda = lambda;
          grid.push_back(p);
        }
  return grid;
}

std::vector<GridPoint> parse_grid_csv(std::istream& in, std::string_view source) {
  std::vector<GridPoint> grid;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      std::string compact;
      for (char c : line)
        if (c != ' ' && c != '\t') compact += c;
      if (compact != kGridHeader)
        throw DataError(std::string(source) + ": row " + std::to_string(line_no) + ": expected header '" +
                        kGridHeader + "'");
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 8)
      throw DataError(std::string(source) + ": row " + std::to_string(line_no) + ": expected 8 fields, found " +
                      std::to_string(fields.size()));
    GridPoint p;
    p.n = parse_field<std::size_t>(fields[0], source, line_no, "n");
    p.d = parse_field<std::size_t>(fields[1], source, line_no, "d");
    p.sigma_ratio = parse_field<double>(fields[2], source, line_no, "sigma_ratio");
    p.eta = parse_field<double>(fields[3], source, line_no, "eta");
    p.lambda = parse_field<double>(fields[4], source, line_no, "lambda");
    p.epsilon_fraction = parse_field<double>(fields[5], source, line_no, "epsilon_fraction");
    p.t = parse_field<std::size_t>(fields[6], source, line_no, "t");
    p.k = parse_field<std::size_t>(fields[7], source, line_no, "k");
    if (p.n < 2 || p.d == 0 || !(p.sigma_ratio > 0.0) || !(p.eta > 0.0) || !(p.lambda >= 0.0) ||
        !(p.epsilon_fraction >= 0.0))
      throw DataError(std::string(source) + ": row " + std::to_string(line_no) + ": value out of range");
    grid.push_back(p);
  }
  if (!header) throw DataError(std::string(source) + ": empty grid file");
  return grid;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::skip: return "skip";
  }
  return "?";
}

double VerificationReport::pass_rate() const {
  const std::size_t applicable = passed + failed;
  return applicable ? static_cast<double>(passed) / static_cast<double>(applicable) : 0.0;
}

VerificationReport verify_theorem(int theorem, const std::vector<GridPoint>& grid, const VerifyOptions& opts) {
  if (theorem < 1 || theorem > 4) throw UsageError("theorem must be 1, 2, 3 or 4");
  VerificationReport report;
  for (const auto& p : grid) {
    if (theorem <= 2)
      verify_comparison(theorem, p, opts, report);
    else
      verify_bounds(theorem, p, opts, report);
  }
  return report;
}

void write_verification_csv(std::ostream& out, const VerificationReport& report) {
  out << "theorem,n,d,sigma,eta,lambda,epsilon,t,k,err_std,err_adv,se,lower,upper,delta,verdict\n";
  for (const auto& r : report.rows) {
    out << r.theorem << ',' << r.point.n << ',' << r.point.d << ',' << fmt(r.sigma) << ',' << fmt(r.point.eta) << ','
        << fmt(r.point.lambda) << ',' << fmt(r.epsilon) << ',' << r.point.t << ',' << r.k << ',' << fmt(r.err_std)
        << ',' << fmt(r.err_adv) << ',' << fmt(r.se) << ',' << fmt(r.lower) << ',' << fmt(r.upper) << ','
        << fmt(r.delta) << ',' << to_string(r.verdict) << '\n';
  }
}

std::string summary_line(const VerificationReport& report) {
  return "passed " + std::to_string(report.passed) + "/" + std::to_string(report.passed + report.failed) +
         ", skipped " + std::to_string(report.skipped);
}

}  // namespace pamacf::theory
