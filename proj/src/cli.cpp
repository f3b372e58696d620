#include "pamacf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "pamacf/attack.hpp"
#include "pamacf/correlation.hpp"
#include "pamacf/dataset.hpp"
#include "pamacf/metrics.hpp"
#include "pamacf/mf_model.hpp"
#include "pamacf/stats.hpp"
#include "pamacf/synthetic.hpp"
#include "pamacf/theory_verify.hpp"
#include "pamacf/training.hpp"

namespace pamacf {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  const SplitConfig split;
  const TrainConfig train;
  const AttackSpec attack;
  const SyntheticConfig synth;
  const theory::VerifyOptions verify;
  return json{
      {"data", ""},
      {"out", ""},
      {"seed", 2024},
      {"split",
       {{"test_fraction", split.test_fraction},
        {"validation_fraction", split.validation_fraction},
        {"min_interactions", split.min_interactions}}},
      {"train",
       {{"mode", std::string(to_string(train.mode))},
        {"eta", train.eta},
        {"lambda", train.lambda},
        {"epsilon", train.epsilon},
        {"rho", train.rho},
        {"weight_decay", train.weight_decay},
        {"pretrain_epochs", train.pretrain_epochs},
        {"total_epochs", train.total_epochs},
        {"batch_size", train.batch_size},
        {"dim", train.dim},
        {"init_scale", train.init_scale}}},
      {"attack",
       {{"method", std::string(to_string(attack.method))},
        {"budget", attack.budget},
        {"targets", json::array()},
        {"filler_count", attack.filler_count},
        {"popular_fraction", attack.popular_fraction},
        {"target_count", 5},
        {"target_min_popularity", 1}}},
      {"eval", {{"model", ""}, {"k", {20}}, {"targets", json::array()}}},
      {"theory",
       {{"theorem", "all"},
        {"grid", ""},
        {"mc_samples", verify.mc_samples},
        {"probe", "boundary"},
        {"sampler", "direct"}}},
      {"sweep", {{"param", "rho"}, {"values", json::array()}, {"repetitions", 1}}},
      {"synth",
       {{"users", synth.n_users},
        {"items", synth.n_items},
        {"interactions", synth.mean_interactions},
        {"zipf_exponent", synth.zipf_exponent},
        {"cluster_affinity", synth.cluster_affinity}}},
  };
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string header_line(const json& cfg) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# pamacf %s config_hash=%016llx seed=%llu\n", kVersion,
                static_cast<unsigned long long>(fnv1a64(cfg.dump())),
                static_cast<unsigned long long>(cfg.at("seed").get<std::uint64_t>()));
  return buf;
}

SplitConfig split_config(const json& cfg) {
  SplitConfig s;
  const auto& j = cfg.at("split");
  s.test_fraction = j.at("test_fraction").get<double>();
  s.validation_fraction = j.at("validation_fraction").get<double>();
  s.min_interactions = j.at("min_interactions").get<std::size_t>();
  s.seed = cfg.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

TrainConfig train_config(const json& cfg) {
  TrainConfig t;
  const auto& j = cfg.at("train");
  t.mode = parse_train_mode(j.at("mode").get<std::string>());
  t.eta = j.at("eta").get<double>();
  t.lambda = j.at("lambda").get<double>();
  t.epsilon = j.at("epsilon").get<double>();
  t.rho = j.at("rho").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
  t.total_epochs = j.at("total_epochs").get<std::size_t>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.dim = j.at("dim").get<std::size_t>();
  t.init_scale = j.at("init_scale").get<double>();
  t.seed = cfg.at("seed").get<std::uint64_t>();
  if (t.mode == TrainMode::standard) t.pretrain_epochs = std::min(t.pretrain_epochs, t.total_epochs);
  t.validate();
  return t;
}

std::vector<std::size_t> k_list(const json& cfg) {
  auto ks = cfg.at("eval").at("k").get<std::vector<std::size_t>>();
  if (ks.empty()) throw UsageError("k-list must not be empty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw UsageError("k values must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1]) throw UsageError("k-list must be strictly ascending");
  }
  return ks;
}

struct LoadedData {
  InteractionDataset ds;
  std::size_t n_genuine = 0;
  std::vector<ItemId> targets;  // from attack provenance, if any
};

LoadedData load_data(const json& cfg) {
  const std::string path = cfg.at("data").get<std::string>();
  if (path.empty()) throw UsageError("--data is required");
  LoadedData out;
  if (fs::is_directory(path)) {
    out.ds = load_split_dir(path);
    out.n_genuine = out.ds.n_users;
    const fs::path prov = fs::path(path) / "attack.json";
    if (fs::exists(prov)) {
      std::ifstream in(prov);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw DataError(prov.string() + ": " + e.what());
      }
      out.n_genuine = j.at("fake_begin").get<std::size_t>();
      out.targets = j.at("spec").at("targets").get<std::vector<ItemId>>();
    }
  } else {
    if (!fs::exists(path)) throw DataError("data file not found: " + path);
    const SplitConfig sc = split_config(cfg);
    out.ds = split(filter_min_interactions(load_interactions(path), sc.min_interactions), sc);
    out.n_genuine = out.ds.n_users;
  }
  return out;
}

// Writes through `fn` to `path`, or to `out` when the path is "-" or empty.
void emit(const std::string& path, std::ostream& out, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(out);
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path);
  fn(file);
  if (!file) throw DataError("failed writing " + path);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int cmd_train(const json& cfg, std::ostream&, std::ostream& err, bool verbose) {
  const TrainConfig tc = train_config(cfg);
  const LoadedData data = load_data(cfg);
  std::vector<EpochRecord> trace;
  ProgressSink sink;
  if (verbose)
    sink = [&err](const EpochRecord& r) {
      err << "epoch " << r.epoch << " " << r.phase << " loss=" << r.mean_bpr_loss << " adv=" << r.mean_adv_loss
          << " norm=" << r.mean_user_norm << "\n";
    };
  EmbeddingModel model = train_new(data.ds, tc, &trace, sink);
  if (!model.all_finite()) throw NumericalError("trained model contains non-finite values");
  std::string dir = cfg.at("out").get<std::string>();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  save_model(model, fs::path(dir) / "model.bin");
  emit((fs::path(dir) / "trace.csv").string(), err, [&](std::ostream& o) {
    o << header_line(cfg);
    write_trace_csv(o, trace);
  });
  return 0;
}

int cmd_attack(const json& cfg, std::ostream&, std::ostream& err) {
  const LoadedData data = load_data(cfg);
  if (data.n_genuine != data.ds.n_users) throw DataError("dataset already contains injected fake users");
  AttackSpec spec;
  from_json(cfg.at("attack"), spec);
  spec.seed = cfg.at("seed").get<std::uint64_t>();
  if (spec.targets.empty()) {
    spec.targets = select_cold_targets(data.ds, cfg.at("attack").at("target_count").get<std::size_t>(),
                                       cfg.at("attack").at("target_min_popularity").get<std::size_t>());
    err << "auto-selected targets:";
    for (ItemId t : spec.targets) err << ' ' << t;
    err << '\n';
  }
  const auto profiles = generate_profiles(data.ds, spec);
  const PoisonedDataset poisoned = inject(data.ds, profiles, spec);
  std::string dir = cfg.at("out").get<std::string>();
  if (dir.empty()) dir = "attack_out";
  save_split_dir(dir, poisoned.data);
  emit((fs::path(dir) / "fake_profiles.txt").string(), err,
       [&](std::ostream& o) { write_profiles(o, profiles, poisoned.fake_begin); });
  json prov = {{"tool", std::string("pamacf ") + kVersion},
               {"config_hash", fnv1a64(cfg.dump())},
               {"spec", spec},
               {"fake_begin", poisoned.fake_begin},
               {"fake_count", poisoned.fake_count}};
  emit((fs::path(dir) / "attack.json").string(), err, [&](std::ostream& o) { o << prov.dump(2) << '\n'; });
  return 0;
}

int cmd_eval(const json& cfg, std::ostream& out, std::ostream&) {
  const auto ks = k_list(cfg);
  const LoadedData data = load_data(cfg);
  const std::string model_path = cfg.at("eval").at("model").get<std::string>();
  if (model_path.empty()) throw UsageError("--model is required");
  const EmbeddingModel model = load_model(model_path);
  auto targets = cfg.at("eval").at("targets").get<std::vector<ItemId>>();
  if (targets.empty()) targets = data.targets;
  const MetricsReport report = evaluate(model, data.ds, ks, targets, data.n_genuine);
  emit(cfg.at("out").get<std::string>(), out, [&](std::ostream& o) {
    o << header_line(cfg);
    write_report_csv(o, report);
  });
  return 0;
}

int cmd_theory(const json& cfg, std::ostream& out, std::ostream&) {
  const auto& j = cfg.at("theory");
  theory::VerifyOptions opts;
  opts.mc_samples = j.at("mc_samples").get<std::size_t>();
  if (opts.mc_samples == 0) throw UsageError("mc-samples must be >= 1");
  opts.seed = cfg.at("seed").get<std::uint64_t>();
  const std::string probe = j.at("probe").get<std::string>();
  if (probe == "boundary")
    opts.probe = theory::ProbePolicy::boundary;
  else if (probe == "sampled")
    opts.probe = theory::ProbePolicy::sampled;
  else
    throw UsageError("probe must be boundary or sampled");
  const std::string sampler = j.at("sampler").get<std::string>();
  if (sampler == "direct")
    opts.sampler = theory::SamplerKind::direct;
  else if (sampler == "population")
    opts.sampler = theory::SamplerKind::population;
  else
    throw UsageError("sampler must be direct or population");

  std::vector<int> theorems;
  const std::string which = j.at("theorem").get<std::string>();
  if (which == "all")
    theorems = {1, 2, 3, 4};
  else if (which.size() == 1 && which[0] >= '1' && which[0] <= '4')
    theorems = {which[0] - '0'};
  else
    throw UsageError("theorem must be 1, 2, 3, 4 or all");

  std::vector<theory::GridPoint> grid;
  const std::string grid_path = j.at("grid").get<std::string>();
  if (grid_path.empty()) {
    grid = theory::default_grid();
  } else {
    std::ifstream in(grid_path);
    if (!in) throw DataError("cannot open grid file " + grid_path);
    grid = theory::parse_grid_csv(in, grid_path);
  }

  theory::VerificationReport all;
  for (int t : theorems) {
    auto r = theory::verify_theorem(t, grid, opts);
    all.passed += r.passed;
    all.failed += r.failed;
    all.skipped += r.skipped;
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
  }
  const std::string path = cfg.at("out").get<std::string>();
  emit(path, out, [&](std::ostream& o) {
    o << header_line(cfg);
    theory::write_verification_csv(o, all);
    o << "# " << theory::summary_line(all) << '\n';
  });
  if (!path.empty() && path != "-") out << theory::summary_line(all) << '\n';
  return 0;
}

int cmd_sweep(const json& cfg, std::ostream& out, std::ostream& err, bool verbose) {
  const auto& j = cfg.at("sweep");
  const std::string param = j.at("param").get<std::string>();
  if (param != "rho" && param != "lambda" && param != "epsilon")
    throw UsageError("sweep parameter must be rho, lambda or epsilon");
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.empty()) throw UsageError("--values must list at least one value");
  const auto reps = j.at("repetitions").get<std::size_t>();
  if (reps == 0) throw UsageError("repetitions must be >= 1");
  const auto ks = k_list(cfg);
  const LoadedData data = load_data(cfg);
  auto targets = cfg.at("eval").at("targets").get<std::vector<ItemId>>();
  if (targets.empty()) targets = data.targets;
  const TrainConfig base = train_config(cfg);

  struct Row {
    double value;
    std::string metric;
    std::size_t k;
    std::vector<double> samples;
  };
  std::vector<Row> rows;
  for (double value : values) {
    std::vector<MetricsReport> reports;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      TrainConfig tc = base;
      if (param == "rho") tc.rho = value;
      if (param == "lambda") tc.lambda = value;
      if (param == "epsilon") tc.epsilon = value;
      tc.seed = base.seed + rep;
      tc.validate();
      EmbeddingModel model = train_new(data.ds, tc);
      model.round_to_storage();
      reports.push_back(evaluate(model, data.ds, ks, targets, data.n_genuine));
      if (verbose) err << param << "=" << value << " rep " << rep << " done\n";
    }
    for (std::size_t r = 0; r < reports[0].rows.size(); ++r) {
      Row row{value, reports[0].rows[r].metric, reports[0].rows[r].k, {}};
      for (const auto& rep : reports) row.samples.push_back(rep.rows[r].value);
      rows.push_back(std::move(row));
    }
  }
  emit(cfg.at("out").get<std::string>(), out, [&](std::ostream& o) {
    o << header_line(cfg);
    o << "param,value,metric,k,mean,stddev\n";
    for (const auto& r : rows)
      o << param << ',' << format_double(r.value) << ',' << r.metric << ',' << r.k << ','
        << format_double(mean(r.samples)) << ',' << format_double(stddev(r.samples)) << '\n';
  });
  return 0;
}

int cmd_synth(const json& cfg, std::ostream& out, std::ostream&) {
  const auto& j = cfg.at("synth");
  SyntheticConfig sc;
  sc.n_users = j.at("users").get<std::size_t>();
  sc.n_items = j.at("items").get<std::size_t>();
  sc.mean_interactions = j.at("interactions").get<std::size_t>();
  sc.zipf_exponent = j.at("zipf_exponent").get<double>();
  sc.cluster_affinity = j.at("cluster_affinity").get<double>();
  sc.seed = cfg.at("seed").get<std::uint64_t>();
  const auto ds = make_two_cluster(sc);
  emit(cfg.at("out").get<std::string>(), out, [&](std::ostream& o) {
    o << header_line(cfg);
    write_interactions(o, ds.train);
  });
  return 0;
}

// Flag values are copied into the effective JSON only when the flag was given.
class Overrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    bindings_.push_back({opt, json::json_pointer(pointer), [value] { return json(*value); }});
    return opt;
  }

  template <class T>
  CLI::Option* add_list(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<std::vector<T>>();
    CLI::Option* opt = app->add_option(flag, *value, help)->delimiter(',');
    bindings_.push_back({opt, json::json_pointer(pointer), [value] { return json(*value); }});
    return opt;
  }

  void apply(json& cfg) const {
    for (const auto& b : bindings_)
      if (b.opt->count() > 0) cfg[b.pointer] = b.value();
  }

 private:
  struct Binding {
    CLI::Option* opt;
    json::json_pointer pointer;
    std::function<json()> value;
  };
  std::vector<Binding> bindings_;
};

void add_split_flags(CLI::App* app, Overrides& o) {
  o.add<double>(app, "--test-fraction", "/split/test_fraction", "Per-user test fraction (ceil)");
  o.add<double>(app, "--validation-fraction", "/split/validation_fraction", "Per-user validation fraction (floor)");
  o.add<std::size_t>(app, "--min-interactions", "/split/min_interactions", "Iterative degree filter threshold");
}

void add_train_flags(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--mode", "/train/mode", "standard | apr | pamacf");
  o.add<double>(app, "--eta", "/train/eta", "Learning rate");
  o.add<double>(app, "--lambda", "/train/lambda", "Adversarial loss weight");
  o.add<double>(app, "--epsilon", "/train/epsilon", "APR perturbation magnitude");
  o.add<double>(app, "--rho", "/train/rho", "PamaCF base magnitude");
  o.add<double>(app, "--weight-decay", "/train/weight_decay", "L2 coefficient on touched rows");
  o.add<std::size_t>(app, "--pretrain-epochs", "/train/pretrain_epochs", "Plain BPR epochs before adversarial ones");
  o.add<std::size_t>(app, "--epochs", "/train/total_epochs", "Total epochs");
  o.add<std::size_t>(app, "--batch-size", "/train/batch_size", "Triples per update");
  o.add<std::size_t>(app, "--dim", "/train/dim", "Embedding dimension");
  o.add<double>(app, "--init-scale", "/train/init_scale", "Std-dev of the initial embeddings");
}

void add_eval_flags(CLI::App* app, Overrides& o) {
  o.add_list<std::size_t>(app, "--k", "/eval/k", "Comma-separated ascending cutoffs");
  o.add_list<ItemId>(app, "--targets", "/eval/targets", "Target items (dense ids) for T-HR/T-NDCG");
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PamaCF: personalized-magnitude adversarial training for MF recommenders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("pamacf ") + kVersion);
  Overrides o;
  std::string config_path;
  bool print_config = false;
  bool verbose = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config; flags override it");
    sub->add_flag("--print-config", print_config, "Print the effective configuration and exit");
    sub->add_flag("--verbose", verbose, "Progress on standard error");
    o.add<std::uint64_t>(sub, "--seed", "/seed", "Seed for every random stream");
    o.add<std::string>(sub, "--out", "/out", "Output path or directory");
  };

  auto* train = app.add_subcommand("train", "Train a model; writes model.bin and trace.csv into --out");
  common(train);
  o.add<std::string>(train, "--data", "/data", "Interaction file or split directory");
  add_split_flags(train, o);
  add_train_flags(train, o);

  auto* attack = app.add_subcommand("attack", "Inject fake users; writes a poisoned split directory into --out");
  common(attack);
  o.add<std::string>(attack, "--data", "/data", "Interaction file or split directory");
  add_split_flags(attack, o);
  o.add<std::string>(attack, "--method", "/attack/method", "random | bandwagon");
  o.add<double>(attack, "--budget", "/attack/budget", "Fake users as a fraction of genuine users");
  o.add_list<ItemId>(attack, "--targets", "/attack/targets", "Target items (dense ids); default: coldest items");
  o.add<long long>(attack, "--filler-count", "/attack/filler_count", "Fillers per profile; negative = mean length");
  o.add<double>(attack, "--popular-fraction", "/attack/popular_fraction", "Bandwagon pool fraction");
  o.add<std::size_t>(attack, "--target-count", "/attack/target_count", "Number of auto-selected targets");
  o.add<std::size_t>(attack, "--target-min-popularity", "/attack/target_min_popularity",
                     "Minimum train popularity of auto-selected targets");

  auto* eval = app.add_subcommand("eval", "Evaluate a model; writes metric,k,value CSV");
  common(eval);
  o.add<std::string>(eval, "--data", "/data", "Interaction file or split directory");
  o.add<std::string>(eval, "--model", "/eval/model", "Model file");
  add_split_flags(eval, o);
  add_eval_flags(eval, o);

  auto* theory_cmd = app.add_subcommand("theory", "Monte-Carlo verification on the Gaussian single-item system");
  common(theory_cmd);
  o.add<std::string>(theory_cmd, "--theorem", "/theory/theorem", "1 | 2 | 3 | 4 | all");
  o.add<std::string>(theory_cmd, "--grid", "/theory/grid", "Grid CSV; default grid when omitted");
  o.add<std::size_t>(theory_cmd, "--mc-samples", "/theory/mc_samples", "Monte-Carlo replicates per grid point");
  o.add<std::string>(theory_cmd, "--probe", "/theory/probe", "boundary | sampled");
  o.add<std::string>(theory_cmd, "--sampler", "/theory/sampler", "direct | population");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate across values of one hyperparameter");
  common(sweep);
  o.add<std::string>(sweep, "--data", "/data", "Interaction file or split directory");
  add_split_flags(sweep, o);
  add_train_flags(sweep, o);
  add_eval_flags(sweep, o);
  o.add<std::string>(sweep, "--param", "/sweep/param", "rho | lambda | epsilon");
  o.add_list<double>(sweep, "--values", "/sweep/values", "Comma-separated values");
  o.add<std::size_t>(sweep, "--repetitions", "/sweep/repetitions", "Seeds per value (seed, seed+1, ...)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic two-community interaction file");
  common(synth);
  o.add<std::size_t>(synth, "--users", "/synth/users", "Users");
  o.add<std::size_t>(synth, "--items", "/synth/items", "Items");
  o.add<std::size_t>(synth, "--interactions", "/synth/interactions", "Mean interactions per user");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    json cfg = default_config();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config " + config_path);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError("config " + config_path + ": " + e.what());
      }
      cfg.merge_patch(file);
    }
    o.apply(cfg);
    if (print_config) {
      out << cfg.dump(2) << '\n';
      return 0;
    }
    if (train->parsed()) return cmd_train(cfg, out, err, verbose);
    if (attack->parsed()) return cmd_attack(cfg, out, err);
    if (eval->parsed()) return cmd_eval(cfg, out, err);
    if (theory_cmd->parsed()) return cmd_theory(cfg, out, err);
    if (sweep->parsed()) return cmd_sweep(cfg, out, err, verbose);
    if (synth->parsed()) return cmd_synth(cfg, out, err);
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error: bad configuration value: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace pamacf
