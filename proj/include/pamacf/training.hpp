#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pamacf/dataset.hpp"
#include "pamacf/mf_model.hpp"

namespace pamacf {

enum class TrainMode { standard, apr, pamacf };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
  TrainMode mode = TrainMode::pamacf;
  double eta = 0.05;
  double lambda = 1.0;
  double epsilon = 0.5;  // apr magnitude
  double rho = 0.5;      // pamacf magnitude
  double weight_decay = 1e-4;
  std::size_t pretrain_epochs = 10;
  std::size_t total_epochs = 40;
  std::size_t batch_size = 1024;
  std::size_t dim = 64;
  double init_scale = 0.1;
  std::uint64_t seed = 2024;

  void validate() const;
  bool adversarial_at(std::size_t epoch) const { return mode != TrainMode::standard && epoch >= pretrain_epochs; }
};

struct BprTriple {
  UserId u;
  ItemId i;  // positive, in train(u)
  ItemId j;  // negative, not in train(u)
};

/// -ln sigmoid(margin), margin = <u,vi> - <u,vj>.
double bpr_loss(std::span<const double> u, std::span<const double> vi, std::span<const double> vj);
double bpr_loss(const EmbeddingModel& m, const BprTriple& t);

/// Gradients of bpr_loss w.r.t. (u, vi, vj). Output spans must have the embedding size.
void bpr_grad(std::span<const double> u, std::span<const double> vi, std::span<const double> vj,
              std::span<double> gu, std::span<double> gi, std::span<double> gj);

struct TripleVectors {
  std::vector<double> user;
  std::vector<double> pos;
  std::vector<double> neg;
};

TripleVectors bpr_grad(const EmbeddingModel& m, const BprTriple& t);

/// sigmoid((norm - mean) / mean). Throws NumericalError when mean == 0.
double pama_coefficient(double user_norm, double mean_norm);
double pama_coefficient(const EmbeddingModel& m, UserId u, double mean_norm);

inline constexpr double kGradientFloor = 1e-12;

/// magnitude * grad / ||grad|| for each of the three embeddings; zero where
/// the gradient norm is below kGradientFloor.
TripleVectors adversarial_perturbation(const EmbeddingModel& m, const BprTriple& t, double magnitude);

struct EpochContext {
  std::size_t epoch = 0;
  double mean_user_norm = 0.0;  // snapshot taken at epoch start
};

/// Magnitude applied to a triple under `cfg` at `ctx` (0 when not adversarial).
double perturbation_magnitude(const EmbeddingModel& m, const BprTriple& t, const TrainConfig& cfg,
                              const EpochContext& ctx);

struct PerturbationEvent {
  BprTriple triple;
  double magnitude;
  const TripleVectors* delta;
};

struct TrainHooks {
  std::function<void(const PerturbationEvent&)> on_perturbation;
};

/// Sparse accumulator of per-row gradients; rows appear in first-touch order.
class RowGradients {
 public:
  explicit RowGradients(std::size_t dim = 0) : dim_(dim) {}
  std::span<double> row(std::uint32_t id);
  std::span<const double> at(std::size_t slot) const { return {data_.data() + slot * dim_, dim_}; }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  // Dense lookup; empty span when the row was never touched.
  std::span<const double> find(std::uint32_t id) const;

 private:
  std::size_t dim_;
  std::vector<std::uint32_t> ids_;
  std::unordered_map<std::uint32_t, std::size_t> slot_;
  std::vector<double> data_;
};

struct BatchGradient {
  RowGradients users;
  RowGradients items;
  double bpr_loss_sum = 0.0;
  double adv_loss_sum = 0.0;
};

/// Summed gradient of L(theta) + lambda * L(theta + delta) over the batch,
/// before weight decay. Per-triple work runs under OpenMP; accumulation is in
/// batch order so the result is bitwise equal to batch_gradient_serial.
BatchGradient batch_gradient(const EmbeddingModel& m, std::span<const BprTriple> batch, const TrainConfig& cfg,
                             const EpochContext& ctx, const TrainHooks& hooks = {});
BatchGradient batch_gradient_serial(const EmbeddingModel& m, std::span<const BprTriple> batch,
                                    const TrainConfig& cfg, const EpochContext& ctx, const TrainHooks& hooks = {});

struct StepStats {
  double bpr_loss_sum = 0.0;
  double adv_loss_sum = 0.0;
  std::size_t triples = 0;
};

/// One gradient-descent update on the batch; weight decay on touched rows.
/// Throws NumericalError if any updated row becomes non-finite.
StepStats train_step(EmbeddingModel& m, std::span<const BprTriple> batch, const TrainConfig& cfg,
                     const EpochContext& ctx, const TrainHooks& hooks = {});

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;
  double mean_bpr_loss = 0.0;
  double mean_adv_loss = 0.0;
  double mean_user_norm = 0.0;
};

using ProgressSink = std::function<void(const EpochRecord&)>;

/// Shuffled epoch of one triple per train pair with freshly drawn negatives.
std::vector<BprTriple> epoch_triples(const InteractionDataset& ds, Rng& rng);

/// pretrain_epochs of plain BPR, then adversarial epochs up to total_epochs.
std::vector<EpochRecord> train(EmbeddingModel& m, const InteractionDataset& ds, const TrainConfig& cfg,
                               const ProgressSink& sink = {}, const TrainHooks& hooks = {});

/// Fresh model from cfg.dim / cfg.init_scale / cfg.seed, trained on ds.
EmbeddingModel train_new(const InteractionDataset& ds, const TrainConfig& cfg,
                         std::vector<EpochRecord>* trace = nullptr, const ProgressSink& sink = {});

void write_trace_csv(std::ostream& out, const std::vector<EpochRecord>& trace);

/// (1 - (eta*lambda*eps_u/||u||) * sum|psi|)^-1, +infinity when the bracket is <= 0.
double gamma_from_terms(double eta, double lambda, double eps_u, double user_norm, std::span<const double> psi);

/// Diagnostic amplification coefficient for user u: each train positive is
/// paired with a negative drawn from a stream seeded by (cfg.seed, u) and
/// contributes sigmoid(-margin) once for the positive and once for the negative role.
double gamma_coefficient(const EmbeddingModel& m, const InteractionDataset& ds, UserId u, const TrainConfig& cfg,
                         const EpochContext& ctx);

}  // namespace pamacf
