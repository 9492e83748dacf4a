#include "msgaf/experiment.hpp"

#include <algorithm>
#include <stdexcept>

namespace msgaf {

Split time_split(std::size_t total) {
  if (total < 3) throw std::invalid_argument("time_split: need at least 3 windows, got " + std::to_string(total));
  Split s;
  s.total = total;
  s.train_end = std::clamp<std::size_t>(total * 70 / 100, 1, total - 2);
  s.val_end = std::max<std::size_t>(s.train_end + 1, total * 85 / 100);
  if (s.val_end >= total) s.val_end = total - 1;
  return s;
}

PreparedData prepare_data(const simkit::Dataset& dataset, int percentile) {
  (void)simkit::percentile_index(percentile);
  validate_graph(dataset.topology.graph);
  PreparedData data;
  data.percentile = percentile;
  data.adjacency = dataset.topology.graph.adjacency;
  data.split = time_split(dataset.records.size());

  std::vector<Matrix> raw;
  raw.reserve(dataset.records.size());
  for (const auto& r : dataset.records) raw.push_back(build_feature_matrix(r.state));
  data.normalizer = fit_normalizer(std::span(raw).subspan(0, data.split.train_end));

  double total = 0.0;
  for (std::size_t i = 0; i < data.split.train_end; ++i) total += dataset.records[i].latency(percentile);
  data.target_scale = total / static_cast<double>(data.split.train_end);
  if (!(data.target_scale > 0.0)) throw std::invalid_argument("training targets must have a positive mean");

  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double target = dataset.records[i].latency(percentile);
    data.examples.push_back({data.normalizer.apply(raw[i]), target / data.target_scale});
    data.targets_ms.push_back(target);
    data.window_ids.push_back(dataset.records[i].window_id);
  }
  return data;
}

Example make_example(const simkit::WindowRecord& record, const Normalizer& normalizer, double target_scale,
                     int percentile) {
  return {normalizer.apply(build_feature_matrix(record.state)), record.latency(percentile) / target_scale};
}

MsgafRegressor::MsgafRegressor(MsgafModel model, Matrix adjacency)
    : model_(std::move(model)), adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != model_.config().nodes || adjacency_.cols() != model_.config().nodes) {
    throw ShapeError("adjacency " + shape_str(adjacency_) + " does not match model node count " +
                     std::to_string(model_.config().nodes));
  }
}

BatchOutputs MsgafRegressor::forward_batch(std::span<const Var> leaves, std::span<const Example* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
  Tape& tape = *leaves.front().tape();
  const ModelVars vars = model_.view(leaves);
  Var a = tape.constant(adjacency_);
  std::vector<Var> latencies, experts;
  latencies.reserve(batch.size());
  experts.reserve(batch.size());
  for (const Example* ex : batch) {
    Forward f = model_.forward(vars, tape.constant(ex->input), a);
    latencies.push_back(f.latency);
    experts.push_back(f.expert_outputs);
  }
  return {ad::concat_rows(latencies), ad::concat_rows(experts)};
}

std::vector<Inference> infer(const MsgafRegressor& model, std::span<const Example> examples) {
  std::vector<Inference> out;
  out.reserve(examples.size());
  auto to_vec = [](const Var& v) {
    auto d = v.value().data();
    return std::vector<double>(d.begin(), d.end());
  };
  for (const Example& ex : examples) {
    Tape tape;
    std::vector<Var> leaves = model.params().bind_constant(tape);
    Forward f = model.model().forward(model.model().view(leaves), tape.constant(ex.input),
                                      tape.constant(model.adjacency()));
    out.push_back({f.latency.value()(0, 0), to_vec(f.beta), to_vec(f.omega), to_vec(f.expert_outputs)});
  }
  return out;
}

Checkpoint TrainedMsgaf::to_checkpoint() const {
  Checkpoint c;
  c.config_hash = config_hash(regressor.model().config(), percentile);
  c.params = regressor.params();
  c.normalizer = normalizer;
  c.target_scale = target_scale;
  c.seed = seed;
  c.epoch = result.best_epoch;
  c.val_loss = result.best_val_loss;
  return c;
}

TrainedMsgaf TrainedMsgaf::from_checkpoint(const Checkpoint& ckpt, const ModelConfig& model, int percentile,
                                           Matrix adjacency) {
  if (ckpt.config_hash != config_hash(model, percentile)) {
    throw CheckpointError("checkpoint config hash does not match the requested model configuration (" +
                          model.canonical() + ", percentile " + std::to_string(percentile) + ")");
  }
  TrainedMsgaf t{MsgafRegressor(MsgafModel(model, ckpt.params), std::move(adjacency)), ckpt.normalizer,
                 ckpt.target_scale, percentile, ckpt.seed, {}};
  t.result.best_epoch = ckpt.epoch;
  t.result.best_val_loss = ckpt.val_loss;
  return t;
}

TrainedMsgaf train_msgaf(const PreparedData& data, const ExperimentConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  if (cfg.percentile != data.percentile) throw std::invalid_argument("experiment percentile differs from prepared data");
  ModelConfig model_cfg = cfg.model;
  model_cfg.nodes = data.adjacency.rows();
  TrainedMsgaf t{MsgafRegressor(MsgafModel(model_cfg, cfg.train.seed), data.adjacency), data.normalizer,
                 data.target_scale, data.percentile, cfg.train.seed, {}};
  t.result = train(t.regressor, data.train(), data.val(), cfg.train, on_epoch);
  return t;
}

std::vector<double> predict_ms(const Regressor& model, std::span<const Example> examples, double target_scale) {
  std::vector<double> p = predict(model, examples);
  for (double& v : p) v *= target_scale;
  return p;
}

}  // namespace msgaf
