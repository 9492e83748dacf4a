#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/params.hpp"
#include "msgaf/tape.hpp"

namespace msgaf {

struct LossConfig {
  double lambda_kl = 0.01;
  double kl_epsilon = 1e-8;
  std::size_t batch_size = 32;

  void validate() const;
};

/// (1/N) sum (pred - target)^2 over N x 1 columns.
Var mse_loss(Var predictions, Var targets);
double mse_loss(std::span<const double> predictions, std::span<const double> targets);

/// Negative mean pairwise KL between the experts' batch profiles. Each column
/// of the N x K input is softmaxed over the batch axis into P_i; the result is
/// -(1/(K(K-1))) sum_{i != j} KL(P_i || P_j) with logs taken of P + epsilon.
/// Zero when K = 1.
Var kl_diversity(Var expert_outputs, const LossConfig& cfg);
double kl_diversity(const Matrix& expert_outputs, const LossConfig& cfg);

/// mse + lambda_kl * kl_diversity; `expert_outputs` may be unset.
Var total_loss(Var predictions, Var targets, Var expert_outputs, const LossConfig& cfg);

/// One training/evaluation item in model units: `input` is whatever the
/// regressor consumes, `target` is the scaled latency.
struct Example {
  Matrix input;
  double target = 0.0;
};

struct BatchOutputs {
  Var predictions;     // N x 1
  Var expert_outputs;  // N x K, unset for single-output models
};

/// Anything trainable by `train`.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
  virtual BatchOutputs forward_batch(std::span<const Var> leaves, std::span<const Example* const> batch) const = 0;
};

/// Predictions with constant parameters; parameters are never modified.
std::vector<double> predict(const Regressor& model, std::span<const Example> examples);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const ParamSet& shape, AdamConfig cfg);
  /// Applies one update from the gradients held by `leaves`.
  void step(ParamSet& params, std::span<const Var> leaves);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  LossConfig loss;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  std::vector<EpochLog> log;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::vector<double> param_norms);
  std::size_t epoch;
  std::vector<double> param_norms;
};

/// Mini-batch Adam with early stopping on validation MSE. On return the
/// model holds the best-validation parameters. Deterministic given the seed.
TrainResult train(Regressor& model, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace msgaf
