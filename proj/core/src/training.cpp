#include "msgaf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace msgaf {

void LossConfig::validate() const {
  if (!std::isfinite(lambda_kl) || lambda_kl < 0.0) throw std::invalid_argument("lambda_kl must be finite and >= 0");
  if (!(kl_epsilon > 0.0)) throw std::invalid_argument("kl_epsilon must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
}

Var mse_loss(Var predictions, Var targets) {
  if (!predictions.value().same_shape(targets.value())) {
    throw ShapeError("mse_loss: predictions " + shape_str(predictions.value()) + " vs targets " +
                     shape_str(targets.value()));
  }
  Var diff = ad::sub(predictions, targets);
  return ad::scale(ad::sum(ad::mul(diff, diff)), 1.0 / static_cast<double>(diff.value().size()));
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw std::invalid_argument("mse_loss: need equal non-empty lengths, got " + std::to_string(predictions.size()) +
                                " and " + std::to_string(targets.size()));
  }
  Tape tape;
  return mse_loss(tape.constant(Matrix::column_vector(predictions)), tape.constant(Matrix::column_vector(targets)))
      .value()(0, 0);
}

Var kl_diversity(Var expert_outputs, const LossConfig& cfg) {
  const std::size_t n = expert_outputs.rows();
  const std::size_t k = expert_outputs.cols();
  if (n < 2) throw std::invalid_argument("kl_diversity needs a batch of at least 2, got " + std::to_string(n));
  Tape& tape = *expert_outputs.tape();
  if (k < 2) return tape.constant(Matrix(1, 1, 0.0));
  Var p = ad::row_softmax(ad::transpose(expert_outputs));  // K x N, row i = P_i
  Var log_p = ad::log(ad::add_scalar(p, cfg.kl_epsilon));
  // cross(i, j) = sum_n P_i(n) log P_j(n); sum_{i,j} KL(P_i||P_j) = K tr(cross) - sum(cross).
  Var cross = ad::matmul(p, ad::transpose(log_p));
  Var trace = ad::sum(ad::mul(cross, tape.constant(Matrix::identity(k))));
  Var total = ad::sub(ad::scale(trace, static_cast<double>(k)), ad::sum(cross));
  return ad::scale(total, -1.0 / static_cast<double>(k * (k - 1)));
}

double kl_diversity(const Matrix& expert_outputs, const LossConfig& cfg) {
  Tape tape;
  return kl_diversity(tape.constant(expert_outputs), cfg).value()(0, 0);
}

Var total_loss(Var predictions, Var targets, Var expert_outputs, const LossConfig& cfg) {
  Var loss = mse_loss(predictions, targets);
  if (cfg.lambda_kl != 0.0 && expert_outputs.valid() && expert_outputs.cols() > 1 && expert_outputs.rows() > 1) {
    loss = ad::add(loss, ad::scale(kl_diversity(expert_outputs, cfg), cfg.lambda_kl));
  }
  return loss;
}

std::vector<double> predict(const Regressor& model, std::span<const Example> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    const std::size_t end = std::min(examples.size(), start + kChunk);
    std::vector<const Example*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[i]);
    Tape tape;
    std::vector<Var> leaves = model.params().bind_constant(tape);
    BatchOutputs o = model.forward_batch(leaves, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(o.predictions.value()(i, 0));
  }
  return out;
}

Adam::Adam(const ParamSet& shape, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& t : shape.tensors()) {
    m_.emplace_back(t.value.rows(), t.value.cols());
    v_.emplace_back(t.value.rows(), t.value.cols());
  }
}

void Adam::step(ParamSet& params, std::span<const Var> leaves) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = leaves[i].grad().data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      p[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.epsilon);
    }
  }
}

namespace {

std::string describe_divergence(std::size_t epoch, const std::vector<double>& norms) {
  std::ostringstream os;
  os << "training diverged (non-finite loss) at epoch " << epoch << "; parameter norms:";
  for (double n : norms) os << ' ' << n;
  return os.str();
}

std::vector<double> param_norms(const ParamSet& params) {
  std::vector<double> norms;
  for (const auto& t : params.tensors()) norms.push_back(frobenius_norm(t.value));
  return norms;
}

double validation_mse(const Regressor& model, std::span<const Example> val) {
  std::vector<double> preds = predict(model, val);
  double s = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const double d = preds[i] - val[i].target;
    s += d * d;
  }
  return s / static_cast<double>(val.size());
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::vector<double> norms)
    : std::runtime_error(describe_divergence(epoch, norms)), epoch(epoch), param_norms(std::move(norms)) {}

TrainResult train(Regressor& model, std::span<const Example> train_set, std::span<const Example> val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.loss.validate();
  if (train_set.size() < 2) throw std::invalid_argument("train: need at least 2 training examples");
  if (val_set.empty()) throw std::invalid_argument("train: validation split is empty");

  std::mt19937_64 rng(cfg.seed);
  Adam adam(model.params(), cfg.adam);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  ParamSet best = model.params();
  result.best_val_loss = validation_mse(model, val_set);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    const std::size_t bs = cfg.loss.batch_size;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = std::min(order.size(), start + bs);
      // A trailing batch of one cannot form a batch distribution; fold it in.
      if (order.size() - end == 1) end = order.size();
      std::vector<const Example*> batch;
      std::vector<double> targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        targets.push_back(train_set[order[i]].target);
      }
      Tape tape;
      std::vector<Var> leaves = model.params().bind(tape);
      double value = 0.0;
      try {
        BatchOutputs out = model.forward_batch(leaves, batch);
        Var loss = total_loss(out.predictions, tape.constant(Matrix::column_vector(targets)), out.expert_outputs,
                              cfg.loss);
        value = loss.value()(0, 0);
        if (!std::isfinite(value)) throw TrainingDiverged(epoch, param_norms(model.params()));
        tape.backward(loss);
      } catch (const std::domain_error&) {
        throw TrainingDiverged(epoch, param_norms(model.params()));
      }
      adam.step(model.params(), leaves);
      loss_sum += value;
      ++batches;
      start = end;
    }
    double val_loss = 0.0;
    try {
      val_loss = validation_mse(model, val_set);
    } catch (const std::domain_error&) {
      throw TrainingDiverged(epoch, param_norms(model.params()));
    }
    if (!std::isfinite(val_loss)) throw TrainingDiverged(epoch, param_norms(model.params()));
    EpochLog entry{epoch, loss_sum / static_cast<double>(batches), val_loss, cfg.adam.lr};
    result.log.push_back(entry);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(entry);
    if (val_loss < result.best_val_loss || result.best_epoch == 0) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = model.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.params() = best;
  return result;
}

}  // namespace msgaf
