#include "pamacf/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <omp.h>

namespace pamacf {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double margin_of(std::span<const double> u, std::span<const double> vi, std::span<const double> vj) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * (vi[k] - vj[k]);
  return s;
}

void normalized_into(std::span<const double> g, double magnitude, std::span<double> out) {
  const double norm = l2_norm(g);
  if (norm < kGradientFloor || magnitude == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double scale = magnitude / norm;
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = scale * g[k];
}

struct TripleResult {
  double loss = 0.0;
  double adv_loss = 0.0;
  double magnitude = 0.0;
};

// Gradient contribution of one triple into (gu, gi, gj). `delta` receives
// the applied perturbation when non-null and the epoch is adversarial.
TripleResult triple_contribution(const EmbeddingModel& m, const BprTriple& t, const TrainConfig& cfg,
                                 const EpochContext& ctx, std::span<double> gu, std::span<double> gi,
                                 std::span<double> gj, TripleVectors* delta) {
  const auto u = m.user(t.u);
  const auto vi = m.item(t.i);
  const auto vj = m.item(t.j);
  TripleResult r;
  r.loss = bpr_loss(u, vi, vj);
  bpr_grad(u, vi, vj, gu, gi, gj);
  if (!cfg.adversarial_at(ctx.epoch)) return r;

  const std::size_t d = m.dim();
  r.magnitude = perturbation_magnitude(m, t, cfg, ctx);
  TripleVectors local;
  TripleVectors& dl = delta ? *delta : local;
  dl.user.resize(d);
  dl.pos.resize(d);
  dl.neg.resize(d);
  normalized_into(gu, r.magnitude, dl.user);
  normalized_into(gi, r.magnitude, dl.pos);
  normalized_into(gj, r.magnitude, dl.neg);

  std::vector<double> pu(d), pi(d), pj(d), au(d), ai(d), aj(d);
  for (std::size_t k = 0; k < d; ++k) {
    pu[k] = u[k] + dl.user[k];
    pi[k] = vi[k] + dl.pos[k];
    pj[k] = vj[k] + dl.neg[k];
  }
  r.adv_loss = bpr_loss(pu, pi, pj);
  bpr_grad(pu, pi, pj, au, ai, aj);
  for (std::size_t k = 0; k < d; ++k) {
    gu[k] += cfg.lambda * au[k];
    gi[k] += cfg.lambda * ai[k];
    gj[k] += cfg.lambda * aj[k];
  }
  return r;
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

std::string phase_name(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.mode == TrainMode::standard) return "standard";
  return epoch < cfg.pretrain_epochs ? "pretrain" : "adversarial";
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::standard: return "standard";
    case TrainMode::apr: return "apr";
    case TrainMode::pamacf: return "pamacf";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view text) {
  if (text == "standard" || text == "mf" || text == "bpr") return TrainMode::standard;
  if (text == "apr") return TrainMode::apr;
  if (text == "pamacf") return TrainMode::pamacf;
  throw UsageError("unknown training mode '" + std::string(text) + "' (expected standard|apr|pamacf)");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be >= 0");
  if (!(rho >= 0.0)) throw UsageError("rho must be >= 0");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be >= 0");
  if (total_epochs < pretrain_epochs) throw UsageError("total epochs must be >= pretrain epochs");
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (dim == 0) throw UsageError("dimension must be >= 1");
}

double bpr_loss(std::span<const double> u, std::span<const double> vi, std::span<const double> vj) {
  return softplus(-margin_of(u, vi, vj));
}

double bpr_loss(const EmbeddingModel& m, const BprTriple& t) { return bpr_loss(m.user(t.u), m.item(t.i), m.item(t.j)); }

void bpr_grad(std::span<const double> u, std::span<const double> vi, std::span<const double> vj,
              std::span<double> gu, std::span<double> gi, std::span<double> gj) {
  const double s = sigmoid(-margin_of(u, vi, vj));
  for (std::size_t k = 0; k < u.size(); ++k) {
    gu[k] = -s * (vi[k] - vj[k]);
    gi[k] = -s * u[k];
    gj[k] = s * u[k];
  }
}

TripleVectors bpr_grad(const EmbeddingModel& m, const BprTriple& t) {
  TripleVectors g{std::vector<double>(m.dim()), std::vector<double>(m.dim()), std::vector<double>(m.dim())};
  bpr_grad(m.user(t.u), m.item(t.i), m.item(t.j), g.user, g.pos, g.neg);
  return g;
}

double pama_coefficient(double user_norm, double mean_norm) {
  if (!(mean_norm > 0.0)) throw NumericalError("degenerate embeddings: mean user norm is zero");
  return sigmoid((user_norm - mean_norm) / mean_norm);
}

double pama_coefficient(const EmbeddingModel& m, UserId u, double mean_norm) {
  return pama_coefficient(user_norm(m, u), mean_norm);
}

TripleVectors adversarial_perturbation(const EmbeddingModel& m, const BprTriple& t, double magnitude) {
  if (!(magnitude >= 0.0)) throw UsageError("perturbation magnitude must be >= 0");
  TripleVectors g = bpr_grad(m, t);
  TripleVectors delta{std::vector<double>(m.dim()), std::vector<double>(m.dim()), std::vector<double>(m.dim())};
  normalized_into(g.user, magnitude, delta.user);
  normalized_into(g.pos, magnitude, delta.pos);
  normalized_into(g.neg, magnitude, delta.neg);
  return delta;
}

double perturbation_magnitude(const EmbeddingModel& m, const BprTriple& t, const TrainConfig& cfg,
                              const EpochContext& ctx) {
  if (!cfg.adversarial_at(ctx.epoch)) return 0.0;
  if (cfg.mode == TrainMode::apr) return cfg.epsilon;
  return cfg.rho * pama_coefficient(m, t.u, ctx.mean_user_norm);
}

std::span<double> RowGradients::row(std::uint32_t id) {
  auto [it, inserted] = slot_.try_emplace(id, ids_.size());
  if (inserted) {
    ids_.push_back(id);
    data_.resize(data_.size() + dim_, 0.0);
  }
  return {data_.data() + it->second * dim_, dim_};
}

std::span<const double> RowGradients::find(std::uint32_t id) const {
  auto it = slot_.find(id);
  if (it == slot_.end()) return {};
  return at(it->second);
}

BatchGradient batch_gradient_serial(const EmbeddingModel& m, std::span<const BprTriple> batch,
                                    const TrainConfig& cfg, const EpochContext& ctx, const TrainHooks& hooks) {
  const std::size_t d = m.dim();
  BatchGradient out{RowGradients(d), RowGradients(d)};
  std::vector<double> gu(d), gi(d), gj(d);
  TripleVectors delta;
  for (const auto& t : batch) {
    auto r = triple_contribution(m, t, cfg, ctx, gu, gi, gj, &delta);
    if (hooks.on_perturbation && cfg.adversarial_at(ctx.epoch)) hooks.on_perturbation({t, r.magnitude, &delta});
    add_into(out.users.row(t.u), gu);
    add_into(out.items.row(t.i), gi);
    add_into(out.items.row(t.j), gj);
    out.bpr_loss_sum += r.loss;
    out.adv_loss_sum += r.adv_loss;
  }
  return out;
}

BatchGradient batch_gradient(const EmbeddingModel& m, std::span<const BprTriple> batch, const TrainConfig& cfg,
                             const EpochContext& ctx, const TrainHooks& hooks) {
  const std::size_t d = m.dim();
  const std::size_t n = batch.size();
  const bool keep_delta = hooks.on_perturbation && cfg.adversarial_at(ctx.epoch);
  std::vector<double> grads(n * 3 * d);
  std::vector<TripleResult> results(n);
  std::vector<TripleVectors> deltas(keep_delta ? n : 0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n); ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * 3 * d;
    std::span<double> gu(grads.data() + base, d), gi(grads.data() + base + d, d), gj(grads.data() + base + 2 * d, d);
    results[b] = triple_contribution(m, batch[b], cfg, ctx, gu, gi, gj, keep_delta ? &deltas[b] : nullptr);
  }

  BatchGradient out{RowGradients(d), RowGradients(d)};
  for (std::size_t b = 0; b < n; ++b) {
    const auto& t = batch[b];
    const std::size_t base = b * 3 * d;
    if (keep_delta) hooks.on_perturbation({t, results[b].magnitude, &deltas[b]});
    add_into(out.users.row(t.u), std::span<const double>(grads.data() + base, d));
    add_into(out.items.row(t.i), std::span<const double>(grads.data() + base + d, d));
    add_into(out.items.row(t.j), std::span<const double>(grads.data() + base + 2 * d, d));
    out.bpr_loss_sum += results[b].loss;
    out.adv_loss_sum += results[b].adv_loss;
  }
  return out;
}

StepStats train_step(EmbeddingModel& m, std::span<const BprTriple> batch, const TrainConfig& cfg,
                     const EpochContext& ctx, const TrainHooks& hooks) {
  BatchGradient g = batch_gradient(m, batch, cfg, ctx, hooks);
  const double eta = cfg.eta;
  const double wd = cfg.weight_decay;
  auto apply = [&](RowGradients& rows, auto&& row_of, const char* kind) {
    for (std::size_t s = 0; s < rows.size(); ++s) {
      auto grad = rows.at(s);
      std::span<double> theta = row_of(rows.ids()[s]);
      bool finite = true;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] -= eta * (grad[k] + wd * theta[k]);
        finite = finite && std::isfinite(theta[k]);
      }
      if (!finite)
        throw NumericalError(std::string("non-finite ") + kind + " embedding after update (row " +
                             std::to_string(rows.ids()[s]) + ", epoch " + std::to_string(ctx.epoch) + ")");
    }
  };
  apply(g.users, [&](std::uint32_t id) { return m.user(id); }, "user");
  apply(g.items, [&](std::uint32_t id) { return m.item(id); }, "item");
  return {g.bpr_loss_sum, g.adv_loss_sum, batch.size()};
}

std::vector<BprTriple> epoch_triples(const InteractionDataset& ds, Rng& rng) {
  std::vector<BprTriple> triples;
  triples.reserve(ds.train_interactions());
  for (UserId u = 0; u < ds.n_users; ++u)
    for (ItemId i : ds.train[u]) triples.push_back({u, i, sample_negative(ds, u, rng)});
  std::shuffle(triples.begin(), triples.end(), rng);
  return triples;
}

std::vector<EpochRecord> train(EmbeddingModel& m, const InteractionDataset& ds, const TrainConfig& cfg,
                               const ProgressSink& sink, const TrainHooks& hooks) {
  cfg.validate();
  if (m.n_users() != ds.n_users || m.n_items() != ds.n_items)
    throw DataError("model shape does not match dataset");
  Rng rng = make_rng(cfg.seed, 1);
  std::vector<EpochRecord> trace;
  for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    EpochContext ctx{epoch, mean_user_norm(m)};
    auto triples = epoch_triples(ds, rng);
    StepStats total;
    for (std::size_t start = 0; start < triples.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, triples.size() - start);
      auto s = train_step(m, std::span<const BprTriple>(triples).subspan(start, len), cfg, ctx, hooks);
      total.bpr_loss_sum += s.bpr_loss_sum;
      total.adv_loss_sum += s.adv_loss_sum;
      total.triples += s.triples;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase_name(cfg, epoch);
    const double denom = total.triples ? static_cast<double>(total.triples) : 1.0;
    rec.mean_bpr_loss = total.bpr_loss_sum / denom;
    rec.mean_adv_loss = total.adv_loss_sum / denom;
    rec.mean_user_norm = mean_user_norm(m);
    if (sink) sink(rec);
    trace.push_back(std::move(rec));
  }
  return trace;
}

EmbeddingModel train_new(const InteractionDataset& ds, const TrainConfig& cfg, std::vector<EpochRecord>* trace,
                         const ProgressSink& sink) {
  cfg.validate();
  EmbeddingModel m = init_embeddings(ds.n_users, ds.n_items, cfg.dim, cfg.seed, cfg.init_scale);
  auto t = train(m, ds, cfg, sink);
  if (trace) *trace = std::move(t);
  return m;
}

void write_trace_csv(std::ostream& out, const std::vector<EpochRecord>& trace) {
  out << "epoch,phase,mean_bpr_loss,mean_adv_loss,mean_user_norm\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g\n", r.epoch, r.phase.c_str(), r.mean_bpr_loss,
                  r.mean_adv_loss, r.mean_user_norm);
    out << buf;
  }
}

double gamma_from_terms(double eta, double lambda, double eps_u, double user_norm, std::span<const double> psi) {
  const double scale = eta * lambda * eps_u;
  if (scale == 0.0) return 1.0;
  if (!(user_norm > 0.0)) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (double p : psi) total += std::abs(p);
  const double denom = 1.0 - scale / user_norm * total;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / denom;
}

double gamma_coefficient(const EmbeddingModel& m, const InteractionDataset& ds, UserId u, const TrainConfig& cfg,
                         const EpochContext& ctx) {
  double eps_u = 0.0;
  if (cfg.mode == TrainMode::apr) eps_u = cfg.epsilon;
  if (cfg.mode == TrainMode::pamacf) eps_u = cfg.rho * pama_coefficient(m, u, ctx.mean_user_norm);
  Rng rng = make_rng(cfg.seed, 0x6A33000000ULL + u);
  std::vector<double> psi;
  psi.reserve(2 * ds.train[u].size());
  for (ItemId i : ds.train[u]) {
    const ItemId j = sample_negative(ds, u, rng);
    const double s = sigmoid(-margin_of(m.user(u), m.item(i), m.item(j)));
    psi.push_back(s);  // positive role
    psi.push_back(s);  // negative role
  }
  return gamma_from_terms(cfg.eta, cfg.lambda, eps_u, user_norm(m, u), psi);
}

}  // namespace pamacf
