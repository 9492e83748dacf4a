#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "msgaf/checkpoint.hpp"
#include "msgaf/encoding.hpp"
#include "msgaf/model.hpp"
#include "msgaf/simkit.hpp"
#include "msgaf/training.hpp"

namespace msgaf {

/// Chronological 70/15/15 split boundaries: [0, train_end), [train_end,
/// val_end), [val_end, total).
struct Split {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
};
Split time_split(std::size_t total);

/// A dataset turned into model inputs for one target percentile. Features
/// are z-scored with statistics from the training split; targets are divided
/// by the mean training target.
struct PreparedData {
  Matrix adjacency;
  Normalizer normalizer;
  double target_scale = 1.0;
  int percentile = 90;
  Split split;
  std::vector<Example> examples;  // all windows, in time order
  std::vector<double> targets_ms;
  std::vector<std::size_t> window_ids;

  std::span<const Example> train() const { return std::span(examples).subspan(0, split.train_end); }
  std::span<const Example> val() const {
    return std::span(examples).subspan(split.train_end, split.val_end - split.train_end);
  }
  std::span<const Example> test() const { return std::span(examples).subspan(split.val_end); }
  std::span<const double> test_targets_ms() const { return std::span(targets_ms).subspan(split.val_end); }
};

PreparedData prepare_data(const simkit::Dataset& dataset, int percentile);

/// Re-applies stored preprocessing to one record (prediction path).
Example make_example(const simkit::WindowRecord& record, const Normalizer& normalizer, double target_scale,
                     int percentile);

/// MSGAF behind the Regressor interface; owns the graph it runs on.
class MsgafRegressor : public Regressor {
 public:
  MsgafRegressor(MsgafModel model, Matrix adjacency);

  ParamSet& params() override { return model_.params(); }
  const ParamSet& params() const override { return model_.params(); }
  BatchOutputs forward_batch(std::span<const Var> leaves, std::span<const Example* const> batch) const override;

  const MsgafModel& model() const noexcept { return model_; }
  const Matrix& adjacency() const noexcept { return adjacency_; }

 private:
  MsgafModel model_;
  Matrix adjacency_;
};

/// Per-sample inference record with fusion and gate diagnostics.
struct Inference {
  double prediction = 0.0;  // scaled units
  std::vector<double> beta;
  std::vector<double> omega;
  std::vector<double> expert_outputs;
};
std::vector<Inference> infer(const MsgafRegressor& model, std::span<const Example> examples);

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  int percentile = 90;
};

struct TrainedMsgaf {
  MsgafRegressor regressor;
  Normalizer normalizer;
  double target_scale = 1.0;
  int percentile = 90;
  std::uint64_t seed = 0;
  TrainResult result;

  Checkpoint to_checkpoint() const;
  static TrainedMsgaf from_checkpoint(const Checkpoint& ckpt, const ModelConfig& model, int percentile,
                                      Matrix adjacency);
};

/// Initializes with cfg.train.seed, trains on the train split with early
/// stopping on val.
TrainedMsgaf train_msgaf(const PreparedData& data, const ExperimentConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {});

/// Predictions in milliseconds.
std::vector<double> predict_ms(const Regressor& model, std::span<const Example> examples, double target_scale);

}  // namespace msgaf
