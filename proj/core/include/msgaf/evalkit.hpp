#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msgaf/experiment.hpp"
#include "msgaf/matrix.hpp"
#include "msgaf/training.hpp"

namespace msgaf::evalkit {

struct MetricReport {
  double mae = 0.0;   // ms
  double rmse = 0.0;  // ms
  double mape = 0.0;  // percent
  int percentile = 90;
  std::size_t n_samples = 0;
};

inline constexpr double kMapeFloor = 1e-6;

MetricReport compute_metrics(std::span<const double> predictions, std::span<const double> targets, int percentile);

/// Column means of a normalized n x 9 feature matrix, as a 1 x 9 row.
Matrix pooled_features(const Matrix& x);

/// Rewrites examples so that `input` is the pooled 1 x 9 row.
std::vector<Example> pool_examples(std::span<const Example> examples);

/// Ordinary least squares with an intercept; inputs are 1 x m rows.
class LinearBaseline {
 public:
  static constexpr double kRidge = 1e-6;

  LinearBaseline(Matrix weights, double intercept);

  double predict(const Matrix& input) const;
  std::vector<double> predict(std::span<const Example> examples) const;

  const Matrix& weights() const noexcept { return weights_; }
  double intercept() const noexcept { return intercept_; }

 private:
  Matrix weights_;  // m x 1
  double intercept_ = 0.0;
};

/// Centered normal equations (X^T X + ridge I) w = X^T y; needs at least
/// m + 1 samples.
LinearBaseline fit_linear_baseline(std::span<const Example> train);

struct MlpConfig {
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  TrainConfig train;
};

/// input -> ReLU(64) -> ReLU(64) -> linear scalar.
class MlpBaseline : public Regressor {
 public:
  MlpBaseline(std::size_t input_dim, const MlpConfig& cfg, std::uint64_t seed);

  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  BatchOutputs forward_batch(std::span<const Var> leaves, std::span<const Example* const> batch) const override;

 private:
  ParamSet params_;
};

/// Trains with MSE only (lambda_kl forced to 0) and early stopping on val.
MlpBaseline fit_mlp_baseline(std::span<const Example> train, std::span<const Example> val, const MlpConfig& cfg);

// ---- experiment tables ------------------------------------------------------

struct RunResult {
  std::string variant;
  int percentile = 90;
  std::uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
};

struct SummaryRow {
  std::string variant;
  std::size_t runs = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double mape_mean = 0.0, mape_std = 0.0;
};

struct ResultTable {
  std::vector<RunResult> runs;  // sorted by variant name, then seed

  std::vector<SummaryRow> summary() const;
  const SummaryRow* find(const std::string& variant) const;
  /// JSON array of {variant, percentile, seed, mae, rmse, mape}.
  std::string to_json() const;
  /// Aligned mean +- std (population) per variant.
  std::string to_text() const;

 private:
  std::vector<SummaryRow> rows_;
  friend ResultTable make_table(std::vector<RunResult> runs);
};

ResultTable make_table(std::vector<RunResult> runs);

struct GridOptions {
  std::size_t threads = 1;
};

/// Trains and tests every variant for every seed on one prepared dataset.
/// `base.model.variant` is overridden per row; the model and shuffle seed is
/// the row seed. Needs at least 3 seeds.
ResultTable run_ablation(const PreparedData& data, std::span<const Variant> variants,
                         std::span<const std::uint64_t> seeds, const ExperimentConfig& base,
                         const GridOptions& options = {});

/// Same protocol over level counts; rows are named "levels=<L>".
ResultTable run_level_sweep(const PreparedData& data, std::span<const std::size_t> levels,
                            std::span<const std::uint64_t> seeds, const ExperimentConfig& base,
                            const GridOptions& options = {});

/// Trains one configuration and scores the test split.
RunResult run_single(const PreparedData& data, const ExperimentConfig& cfg, std::string label);

}  // namespace msgaf::evalkit
