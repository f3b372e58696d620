// One PASS/FAIL line per acceptance criterion. The process exits 0 whenever
// every check ran to completion; verdicts are reported, not enforced.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "pamacf/cli.hpp"
#include "pamacf/correlation.hpp"
#include "pamacf/gaussian.hpp"
#include "pamacf/metrics.hpp"
#include "pamacf/stats.hpp"
#include "pamacf/synthetic.hpp"
#include "pamacf/theory_verify.hpp"
#include "pamacf/training.hpp"

namespace fs = std::filesystem;
using namespace pamacf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failed = 0;

void report(const std::string& id, const std::string& name, const Outcome& o) {
  std::printf("%s %s %s: %s\n", o.pass ? "PASS" : "FAIL", id.c_str(), name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  g_failed += !o.pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

theory::VerifyOptions grid_options() {
  theory::VerifyOptions o;
  o.mc_samples = 20000;
  o.seed = 2024;
  return o;
}

Outcome comparison_criterion(int theorem) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = theory::verify_theorem(theorem, theory::default_grid(), grid_options());
  const double secs = seconds_since(t0);
  const std::size_t applicable = r.passed + r.failed;
  const bool pass = applicable > 0 && r.pass_rate() >= 0.95 && secs < 120.0;
  double max_shrink = 0.0;
  for (const auto& row : r.rows) max_shrink = std::max(max_shrink, row.item_shrink);
  return {pass, fmt("%zu/%zu applicable points pass (%.1f%%, need >= 95%%), %zu skipped, max item shrink "
                    "coefficient %.3g, %.1fs (limit 120s)",
                    r.passed, applicable, 100.0 * r.pass_rate(), r.skipped, max_shrink, secs)};
}

bool same(double a, double b, double tol) { return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= tol; }

Outcome sandwich_criterion() {
  const auto grid = theory::default_grid();
  const auto r3 = theory::verify_theorem(3, grid, grid_options());
  const auto r4 = theory::verify_theorem(4, grid, grid_options());

  // Poisoned bounds with no fakes must collapse onto the clean bounds.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    theory::BoundsInput in;
    in.n = 2 + static_cast<std::size_t>(unit(rng) * 2000);
    in.d = 1 + static_cast<std::size_t>(unit(rng) * 64);
    in.sigma = 0.005 + 0.2 * unit(rng);
    in.u_bar_norm = 0.5 + unit(rng);
    in.u_bar_l0 = in.d;
    in.eta = 0.001 + 0.05 * unit(rng);
    in.lambda = unit(rng) * 2;
    in.user_norm = 0.2 + 2 * unit(rng);
    in.epsilon = unit(rng) * 0.9 * std::min(in.user_norm, in.u_bar_norm) / std::max(in.eta * in.lambda, 1e-12);
    if (in.lambda == 0.0) in.epsilon = 0.0;
    in.item_scale = 1 + 50 * unit(rng);
    const auto clean = theory::theorem_bounds(in, false);
    const auto poisoned = theory::theorem_bounds(in, true);
    if (!same(clean.lower, poisoned.lower, 1e-12) || !same(clean.upper, poisoned.upper, 1e-12)) {
      worst = std::max({worst, std::abs(clean.lower - poisoned.lower), std::abs(clean.upper - poisoned.upper)});
      if (std::isnan(worst) || worst == 0.0) worst = INFINITY;
    }
    ++compared;
  }
  const bool reduce_ok = worst <= 1e-12;
  const bool pass = r3.failed == 0 && r4.failed == 0 && reduce_ok;
  return {pass, fmt("clean %zu/%zu, poisoned %zu/%zu rows inside [lower-3SE, upper+3SE] (%zu+%zu skipped for "
                    "|u_bar|/sigma < 20 or outside the magnitude cap); no-fake reduction max diff %.3g over %zu inputs "
                    "(tol 1e-12)",
                    r3.passed, r3.passed + r3.failed, r4.passed, r4.passed + r4.failed, r3.skipped, r4.skipped, worst,
                    compared)};
}

Outcome recurrence_criterion() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t n : {2, 3, 10, 200, 1000})
    for (double eta : {0.001, 0.01, 0.05})
      for (std::uint64_t seed : {1, 2}) {
        theory::GaussianConfig cfg;
        cfg.n = n;
        cfg.d = 8;
        cfg.sigma = 0.1;
        cfg.eta = eta;
        cfg.seed = seed;
        auto s = theory::init_system(cfg);
        const auto v0 = s.v;
        for (std::size_t t = 0; t <= 20; ++t) {
          const double m = oracle::item_scale(t, eta, n);
          const double lib = theory::transform_factor(t, eta, n);
          double err = 0.0, norm = 0.0;
          for (std::size_t k = 0; k < v0.size(); ++k) {
            err += std::pow(s.v[k] - m * v0[k], 2);
            norm += std::pow(m * v0[k], 2);
          }
          worst = std::max({worst, std::sqrt(err / norm), std::abs(lib - m) / m});
          ++cases;
          theory::standard_epoch(s, eta);
        }
      }
  return {worst <= 1e-9, fmt("max relative error %.3g over %zu (n, eta, seed, t<=20) cases (tol 1e-9)", worst, cases)};
}

Outcome gradient_criterion() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 15);
    std::vector<double> u(d), vi(d), vj(d);
    for (std::size_t k = 0; k < d; ++k) {
      u[k] = normal(rng);
      vi[k] = normal(rng);
      vj[k] = normal(rng);
    }
    std::vector<double> gu(d), gi(d), gj(d);
    bpr_grad(u, vi, vj, gu, gi, gj);
    const auto fd = oracle::finite_difference(u, vi, vj, 1e-6);
    for (const auto& [lib, ref] : {std::pair{&gu, &fd.u}, std::pair{&gi, &fd.vi}, std::pair{&gj, &fd.vj}}) {
      double scale = 0.0;
      for (double x : *ref) scale = std::max(scale, std::abs(x));
      for (std::size_t k = 0; k < d; ++k)
        worst = std::max(worst, std::abs((*lib)[k] - (*ref)[k]) / std::max(scale, 1e-300));
    }
  }
  return {worst < 1e-5, fmt("max relative error %.3g over 100 triples, step 1e-6 (tol 1e-5)", worst)};
}

Outcome metric_criterion() {
  std::mt19937_64 rng(11);
  std::size_t mismatches = 0, checks = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n_users = 2 + rng() % 19;
    const std::size_t n_items = 5 + rng() % 46;
    const auto ds = oracle::random_dataset(n_users, n_items, 0.25, rng);
    const auto m = init_embeddings(n_users, n_items, 4, rng(), 1.0);
    std::vector<ItemId> targets;
    for (ItemId i = 0; i < n_items && targets.size() < 3; ++i) {
      bool eligible = false;
      for (UserId u = 0; u < n_users; ++u) eligible |= !oracle::touched(ds, u, i);
      if (eligible && rng() % 3 == 0) targets.push_back(i);
    }
    if (targets.empty())
      for (ItemId i = 0; i < n_items && targets.empty(); ++i)
        for (UserId u = 0; u < n_users; ++u)
          if (!oracle::touched(ds, u, i)) {
            targets.push_back(i);
            break;
          }
    bool any_test = false;
    for (const auto& t : ds.test) any_test |= !t.empty();
    for (std::size_t k : {1, 5, 10}) {
      std::vector<std::vector<ItemId>> lists(n_users);
      for (UserId u = 0; u < n_users; ++u) lists[u] = oracle::top_k(m, ds, u, k);
      const auto recs = rank_users(m, ds, k, n_users);
      mismatches += recs != lists;
      if (any_test) {
        mismatches += recall_at_k(recs, ds.test, k) != oracle::recall(lists, ds.test, k);
        mismatches += ndcg_at_k(recs, ds.test, k) != oracle::ndcg(lists, ds.test, k);
        checks += 2;
      }
      if (!targets.empty()) {
        mismatches += target_hit_ratio(recs, ds, targets, k, n_users) !=
                      oracle::target_hr(lists, ds, targets, k, n_users);
        mismatches += target_ndcg(recs, ds, targets, k, n_users) != oracle::target_ndcg(lists, ds, targets, k, n_users);
        checks += 2;
      }
      ++checks;
    }
  }
  return {mismatches == 0, fmt("%zu mismatches in %zu exact comparisons over 50 instances, k in {1,5,10}", mismatches,
                               checks)};
}

double oracle_mean_norm(const EmbeddingModel& m) {
  double s = 0.0;
  for (UserId u = 0; u < m.n_users(); ++u) s += std::sqrt(oracle::dot({m.user(u).begin(), m.user(u).end()},
                                                                      {m.user(u).begin(), m.user(u).end()}));
  return s / static_cast<double>(m.n_users());
}

Outcome mechanics_criterion() {
  SyntheticConfig sc;
  sc.n_users = 60;
  sc.n_items = 80;
  sc.mean_interactions = 12;
  const auto ds = make_two_cluster(sc);
  TrainConfig cfg;
  cfg.mode = TrainMode::pamacf;
  cfg.rho = 0.5;
  cfg.lambda = 1.0;
  cfg.pretrain_epochs = 0;
  cfg.batch_size = 64;
  cfg.dim = 8;
  auto m = init_embeddings(ds.n_users, ds.n_items, cfg.dim, 5, 0.3);

  double worst = 0.0;
  std::size_t events = 0, vectors = 0, floored = 0;
  Rng rng = make_rng(3, 0);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    const double mean = oracle_mean_norm(m);
    const EpochContext ctx{epoch, mean};
    TrainHooks hooks;
    hooks.on_perturbation = [&](const PerturbationEvent& e) {
      const auto u = m.user(e.triple.u);
      const double norm = std::sqrt(oracle::dot({u.begin(), u.end()}, {u.begin(), u.end()}));
      const double expected = cfg.rho / (1.0 + std::exp(-(norm - mean) / mean));
      worst = std::max(worst, std::abs(e.magnitude - expected));
      for (const auto* d : {&e.delta->user, &e.delta->pos, &e.delta->neg}) {
        const double len = std::sqrt(oracle::dot(*d, *d));
        if (len == 0.0) {
          ++floored;
          continue;
        }
        worst = std::max(worst, std::abs(len - expected));
        ++vectors;
      }
      ++events;
    };
    auto triples = epoch_triples(ds, rng);
    for (std::size_t b = 0; b < triples.size(); b += cfg.batch_size) {
      const std::span<const BprTriple> batch(triples.data() + b, std::min(cfg.batch_size, triples.size() - b));
      train_step(m, batch, cfg, ctx, hooks);
    }
  }

  double half_dev = 0.0;
  for (double x : {1e-3, 0.37, 1.0, 12.5}) half_dev = std::max(half_dev, std::abs(pama_coefficient(x, x) - 0.5));
  EmbeddingModel equal(5, 3, 2);
  for (UserId u = 0; u < 5; ++u) {
    equal.user(u)[0] = u % 2 ? 0.6 : 0.8;
    equal.user(u)[1] = u % 2 ? 0.8 : 0.6;
  }
  for (UserId u = 0; u < 5; ++u)
    half_dev = std::max(half_dev, std::abs(pama_coefficient(equal, u, mean_user_norm(equal)) - 0.5));

  TrainConfig zero = cfg;
  zero.lambda = 0.0;
  zero.total_epochs = 5;
  zero.pretrain_epochs = 0;
  TrainConfig plain = zero;
  plain.mode = TrainMode::standard;
  const bool identical = train_new(ds, zero) == train_new(ds, plain);

  const bool pass = worst <= 1e-10 && events > 0 && half_dev <= 1e-15 && identical;
  return {pass, fmt("max | |delta| - rho*c | = %.3g over %zu perturbation vectors (%zu events, %zu below gradient "
                    "floor; tol 1e-10); max |c - 0.5| at mean norm = %.3g; lambda=0 run %s standard run",
                    worst, vectors, events, floored, half_dev, identical ? "bit-identical to" : "DIFFERS from")};
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, double> parse_metrics(const std::string& csv) {
  std::map<std::string, double> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("metric", 0) == 0) continue;
    const auto a = line.find(','), b = line.rfind(',');
    out[line.substr(0, a)] = std::stod(line.substr(b + 1));
  }
  return out;
}

// Shared by the end-to-end check; selected on seeds 101-105, reported on 1-5.
const std::vector<std::string> kE2eTrain = {"--eta", "0.005", "--epochs", "80", "--pretrain-epochs", "20",
                                            "--weight-decay", "0.0001", "--dim", "16", "--rho", "0.1",
                                            "--lambda", "1"};

Outcome end_to_end_criterion(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = root / "e2e";
  fs::create_directories(dir);
  { std::ofstream(dir / "synth.json") << R"({"synth": {"users": 200, "items": 300, "interactions": 30, "cluster_affinity": 6}})"; }
  std::vector<double> thr_mf, thr_pama, ndcg_mf, ndcg_pama;
  for (int seed = 1; seed <= 5; ++seed) {
    const std::string s = std::to_string(seed);
    const auto syn = (dir / ("syn" + s + ".txt")).string();
    const auto att = (dir / ("att" + s)).string();
    if (cli({"synth", "--config", (dir / "synth.json").string(), "--seed", s, "--out", syn}).code != 0 ||
        cli({"attack", "--data", syn, "--min-interactions", "0", "--method", "random", "--budget", "0.05",
             "--target-count", "3", "--seed", s, "--out", att})
                .code != 0)
      return {false, "data preparation failed"};
    for (const std::string mode : {"standard", "pamacf"}) {
      const auto mdir = (dir / (mode + s)).string();
      std::vector<std::string> args = {"train", "--data", att, "--mode", mode, "--seed", s, "--out", mdir};
      args.insert(args.end(), kE2eTrain.begin(), kE2eTrain.end());
      if (cli(args).code != 0) return {false, "training failed"};
      const auto ev = cli({"eval", "--data", att, "--model", mdir + "/model.bin", "--k", "20"});
      if (ev.code != 0) return {false, "evaluation failed: " + ev.err};
      const auto metrics = parse_metrics(ev.out);
      (mode == "standard" ? thr_mf : thr_pama).push_back(metrics.at("t_hr"));
      (mode == "standard" ? ndcg_mf : ndcg_pama).push_back(metrics.at("ndcg"));
    }
  }
  const double secs = seconds_since(t0);
  const double a = median(thr_pama), b = median(thr_mf), c = median(ndcg_pama), d = median(ndcg_mf);
  const bool pass = a < b && c >= d && secs < 300.0;
  return {pass, fmt("median T-HR@20 PamaCF %.4f vs MF %.4f (need <); median NDCG@20 PamaCF %.4f vs MF %.4f (need >=); "
                    "%.1fs (limit 300s)",
                    a, b, c, d, secs)};
}

Outcome correlation_criterion() {
  int positive = 0;
  std::string values;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GaussianLabConfig cfg;
    cfg.n = 500;
    cfg.sigma_ratio = 0.05;
    cfg.seed = seed;
    const auto r = gaussian_lab(cfg);
    if (r.spearman && *r.spearman > 0) ++positive;
    values += r.spearman ? fmt(" %.3f", *r.spearman) : std::string(" undefined");
  }
  return {positive >= 4, fmt("Spearman > 0 in %d/5 seeds (need >= 4):%s", positive, values.c_str())};
}

Outcome determinism_criterion(const fs::path& root) {
  const std::string data = (root / "det_data.txt").string();
  if (cli({"synth", "--users", "60", "--items", "80", "--interactions", "15", "--out", data}).code != 0)
    return {false, "synth failed"};
  { std::ofstream(root / "grid.csv") << "n,d,sigma_ratio,eta,lambda,epsilon_fraction,t,k\n200,8,0.02,0.01,1,0.05,5,2\n200,8,0.02,0.01,0,0.5,5,1\n"; }
  // Identical flags, including output paths, so the config hash matches too.
  const fs::path d = root / "det";
  const std::string D = d.string();
  const std::vector<std::vector<std::string>> commands = {
      {"synth", "--users", "60", "--items", "80", "--interactions", "15", "--out", D + "/synth.txt"},
      {"attack", "--data", data, "--min-interactions", "0", "--budget", "0.05", "--method", "bandwagon", "--out",
       D + "/att"},
      {"train", "--data", D + "/att", "--mode", "pamacf", "--epochs", "4", "--pretrain-epochs", "1", "--dim", "8",
       "--out", D + "/model"},
      {"eval", "--data", D + "/att", "--model", D + "/model/model.bin", "--k", "5,10", "--out", D + "/eval.csv"},
      {"theory", "--theorem", "all", "--grid", (root / "grid.csv").string(), "--mc-samples", "2000", "--out",
       D + "/theory.csv"},
      {"sweep", "--data", D + "/att", "--param", "rho", "--values", "0.1,0.5", "--repetitions", "2", "--epochs", "3",
       "--pretrain-epochs", "1", "--dim", "8", "--out", D + "/sweep.csv"},
  };
  std::map<std::string, std::string> snapshots[2];
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(d);
    fs::create_directories(d);
    for (const auto& c : commands) {
      const auto r = cli(c);
      if (r.code != 0) return {false, c[0] + " exited with " + std::to_string(r.code) + ": " + r.err};
    }
    for (const auto& entry : fs::recursive_directory_iterator(d))
      if (entry.is_regular_file()) snapshots[run][fs::relative(entry.path(), d).string()] = slurp(entry.path());
  }
  std::vector<std::string> differing;
  const std::size_t compared = snapshots[0].size();
  for (const auto& [name, bytes] : snapshots[0]) {
    const auto it = snapshots[1].find(name);
    if (it == snapshots[1].end() || it->second != bytes) differing.push_back(name);
  }
  std::string list;
  for (const auto& f : differing) list += " " + f;
  return {differing.empty() && compared >= 10,
          fmt("%zu output files compared across two runs, %zu differ%s", compared, differing.size(), list.c_str())};
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / ("pamacf_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);
  const auto t0 = std::chrono::steady_clock::now();

  report("A1", "adversarial epoch beats standard epoch (clean)", comparison_criterion(1));
  report("A2", "adversarial epoch beats standard epoch (poisoned)", comparison_criterion(2));
  report("A3", "error-reduction bounds contain the simulated reduction", sandwich_criterion());
  report("A4", "item scale recurrence matches simulation", recurrence_criterion());
  report("A5", "BPR gradient matches finite differences", gradient_criterion());
  report("A6", "ranking metrics match brute-force oracles", metric_criterion());
  report("A7", "personalized perturbation mechanics", mechanics_criterion());
  report("A8", "directional end-to-end robustness", end_to_end_criterion(root));
  report("A9", "threshold magnitude correlates with user norm", correlation_criterion());
  report("A10", "CLI outputs are deterministic", determinism_criterion(root));

  std::printf("acceptance: %d/10 criteria pass, %.1fs total\n", 10 - g_failed, seconds_since(t0));
  std::error_code ec;
  fs::remove_all(root, ec);
  return 0;
}
