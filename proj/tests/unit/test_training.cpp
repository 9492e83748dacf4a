#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "msgaf/checkpoint.hpp"
#include "msgaf/evalkit.hpp"
#include "msgaf/experiment.hpp"
#include "msgaf/simkit.hpp"
#include "msgaf/training.hpp"
#include "support.hpp"

using namespace msgaf;
using msgaf::testing::random_matrix;

namespace {

// Sum over ordered pairs i != j of KL(P_i || P_j), written from the definition.
double kl_oracle(const Matrix& e, double eps) {
  const std::size_t n = e.rows(), k = e.cols();
  std::vector<std::vector<double>> p(k, std::vector<double>(n));
  for (std::size_t i = 0; i < k; ++i) {
    double top = -INFINITY, z = 0.0;
    for (std::size_t r = 0; r < n; ++r) top = std::max(top, e(r, i));
    for (std::size_t r = 0; r < n; ++r) z += std::exp(e(r, i) - top);
    for (std::size_t r = 0; r < n; ++r) p[i][r] = std::exp(e(r, i) - top) / z;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      for (std::size_t r = 0; r < n; ++r) total += p[i][r] * (std::log(p[i][r] + eps) - std::log(p[j][r] + eps));
    }
  return -total / static_cast<double>(k * (k - 1));
}

ModelConfig small_config(std::size_t n) {
  ModelConfig c;
  c.nodes = n;
  c.hidden_dim = 16;
  c.attn_dim = 16;
  c.scene_hidden_dim = 16;
  c.scene_dim = 8;
  c.expert_hidden_dim = 16;
  return c;
}

simkit::Dataset small_dataset(std::size_t windows, std::uint64_t seed) {
  simkit::DatasetSpec spec;
  spec.windows = windows;
  spec.seed = seed;
  return simkit::generate_dataset(spec);
}

}  // namespace

TEST_CASE("mse examples") {
  const std::vector<double> t = {1.0, 3.0};
  CHECK(mse_loss(t, t) == 0.0);
  CHECK(mse_loss(std::vector<double>{0.0, 0.0}, t) == 5.0);
  const std::vector<double> p = {1.5, 2.0}, scaled = {1.0 + 3 * 0.5, 3.0 - 3 * 1.0};
  CHECK(mse_loss(scaled, t) == doctest::Approx(9.0 * mse_loss(p, t)).epsilon(1e-14));
  CHECK_THROWS_AS(mse_loss(std::vector<double>{1.0}, t), std::invalid_argument);
}

TEST_CASE("kl diversity examples") {
  LossConfig cfg;
  SUBCASE("identical experts") {
    std::mt19937_64 rng(1);
    const Matrix col = random_matrix(6, 1, rng);
    Matrix e(6, 3);
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 3; ++c) e(r, c) = col(r, 0);
    CHECK(std::abs(kl_diversity(e, cfg)) < 1e-15);
  }
  SUBCASE("two mirrored experts") {
    const Matrix e = Matrix::from_rows({{0.0, std::log(3.0)}, {std::log(3.0), 0.0}});
    // p = (1/4, 3/4), q = (3/4, 1/4): KL(p||q) = KL(q||p) = (1/2) ln 3.
    CHECK(std::abs(kl_diversity(e, cfg) - (-0.5 * std::log(3.0))) < 1e-7);
    CHECK(kl_diversity(e, cfg) == doctest::Approx(-0.5493).epsilon(1e-4));
  }
  SUBCASE("single expert and tiny batches") {
    CHECK(kl_diversity(Matrix(4, 1, 2.0), cfg) == 0.0);
    CHECK_THROWS_AS(kl_diversity(Matrix(1, 4, 2.0), cfg), std::invalid_argument);
  }
}

TEST_CASE("kl diversity matches the pairwise oracle, is non-positive and shift invariant") {
  std::mt19937_64 rng(2);
  LossConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 7, k = 2 + trial % 4;
    Matrix e = random_matrix(n, k, rng, -3, 3);
    const double v = kl_diversity(e, cfg);
    CHECK(std::abs(v - kl_oracle(e, cfg.kl_epsilon)) < 1e-12);
    CHECK(v <= 1e-15);
    for (std::size_t r = 0; r < n; ++r) e(r, 1) += 4.2;
    CHECK(std::abs(kl_diversity(e, cfg) - v) < 1e-10);
  }
}

TEST_CASE("kl diversity decreases as expert profiles diverge") {
  const Matrix base = Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.2}});
  LossConfig cfg;
  double prev = kl_diversity(scale(base, 0.0), cfg);
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    const double v = kl_diversity(scale(base, s), cfg);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("total loss examples") {
  Tape tape;
  Var preds = tape.constant(Matrix::from_rows({{1.0}, {2.0}, {4.0}}));
  Var targets = tape.constant(Matrix::from_rows({{1.5}, {2.0}, {3.0}}));
  std::mt19937_64 rng(3);
  Var experts = tape.constant(random_matrix(3, 4, rng));
  LossConfig off;
  off.lambda_kl = 0.0;
  CHECK(total_loss(preds, targets, experts, off).value() == mse_loss(preds, targets).value());

  LossConfig on;
  Var same = tape.constant(Matrix(3, 4, 0.7));
  CHECK(total_loss(targets, targets, same, on).value()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const double with_kl = total_loss(preds, targets, experts, on).value()(0, 0);
  CHECK(with_kl == doctest::Approx(mse_loss(preds, targets).value()(0, 0) +
                                   on.lambda_kl * kl_diversity(experts.value(), on)));
}

TEST_CASE("loss config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.lambda_kl = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("one Adam step at lr 1e-5 lowers the loss on a frozen batch") {
  const simkit::Dataset ds = small_dataset(40, 3);
  const PreparedData data = prepare_data(ds, 90);
  MsgafRegressor model(MsgafModel(small_config(ds.topology.size()), 4), data.adjacency);
  std::vector<const Example*> batch;
  std::vector<double> targets;
  for (std::size_t i = 0; i < 8; ++i) {
    batch.push_back(&data.examples[i]);
    targets.push_back(data.examples[i].target);
  }
  LossConfig loss;
  auto evaluate = [&](bool step, Adam* adam) {
    Tape tape;
    std::vector<Var> leaves = model.params().bind(tape);
    BatchOutputs out = model.forward_batch(leaves, batch);
    Var l = total_loss(out.predictions, tape.constant(Matrix::column_vector(targets)), out.expert_outputs, loss);
    if (step) {
      tape.backward(l);
      adam->step(model.params(), leaves);
    }
    return l.value()(0, 0);
  };
  Adam adam(model.params(), AdamConfig{1e-5});
  const double before = evaluate(true, &adam);
  const double after = evaluate(false, nullptr);
  CHECK(after < before);
  CHECK(adam.steps() == 1);
}

TEST_CASE("constant targets are fitted within 50 epochs") {
  simkit::Dataset ds = small_dataset(400, 5);
  const double constant = 120.0;
  for (auto& r : ds.records) r.latency_p50 = r.latency_p90 = r.latency_p99 = constant;
  const PreparedData data = prepare_data(ds, 90);
  CHECK(data.target_scale == constant);
  ExperimentConfig cfg;
  cfg.train.max_epochs = 50;
  cfg.train.seed = 2;
  // The diversity term is unbounded below, so convergence is judged on pure MSE.
  cfg.train.loss.lambda_kl = 0.0;
  const TrainedMsgaf t = train_msgaf(data, cfg);
  const auto preds = predict_ms(t.regressor, data.train(), data.target_scale);
  double mse = 0.0;
  for (double p : preds) mse += (p - constant) * (p - constant);
  mse /= static_cast<double>(preds.size());
  MESSAGE("constant-target train MSE " << mse << " ms^2");
  CHECK(mse <= 1e-4 * constant * constant);
}

TEST_CASE("latency linear in the quotas is learned to under 5% MAPE") {
  simkit::Dataset ds = small_dataset(1000, 6);
  std::vector<double> coef(ds.topology.size());
  for (std::size_t i = 0; i < coef.size(); ++i) coef[i] = 4.0 + 3.0 * static_cast<double>(i % 4);
  for (auto& r : ds.records) {
    double y = 40.0;
    for (std::size_t i = 0; i < coef.size(); ++i) y += coef[i] * r.state.quota(i, 0);
    r.latency_p50 = r.latency_p90 = r.latency_p99 = y;
  }
  const PreparedData data = prepare_data(ds, 90);
  ExperimentConfig cfg;
  cfg.train.max_epochs = 200;
  cfg.train.seed = 3;
  const TrainedMsgaf t = train_msgaf(data, cfg);
  const auto m = evalkit::compute_metrics(predict_ms(t.regressor, data.test(), data.target_scale),
                                          data.test_targets_ms(), 90);
  MESSAGE("linear-in-quota test MAPE " << m.mape);
  CHECK(m.mape < 5.0);
}

TEST_CASE("training is deterministic and restores the best epoch") {
  const simkit::Dataset ds = small_dataset(60, 7);
  const PreparedData data = prepare_data(ds, 90);
  ExperimentConfig cfg;
  cfg.model = small_config(ds.topology.size());
  cfg.train.max_epochs = 6;
  cfg.train.patience = 3;
  cfg.train.seed = 9;
  std::size_t logged = 0;
  const TrainedMsgaf a = train_msgaf(data, cfg, [&](const EpochLog&) { ++logged; });
  const TrainedMsgaf b = train_msgaf(data, cfg);
  CHECK(serialize_checkpoint(a.to_checkpoint()) == serialize_checkpoint(b.to_checkpoint()));
  CHECK(logged == a.result.epochs_run);
  CHECK(a.result.best_epoch >= 1);
  CHECK(a.result.best_val_loss == doctest::Approx(a.result.log[a.result.best_epoch - 1].val_loss));
  double val = 0.0;
  const auto preds = predict(a.regressor, data.val());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - data.val()[i].target;
    val += d * d;
  }
  CHECK(val / static_cast<double>(preds.size()) == a.result.best_val_loss);
}

TEST_CASE("non-finite losses abort with the epoch and parameter norms") {
  const simkit::Dataset ds = small_dataset(30, 8);
  PreparedData data = prepare_data(ds, 90);
  ExperimentConfig cfg;
  cfg.model = small_config(ds.topology.size());
  cfg.train.adam.lr = 1e200;
  cfg.train.max_epochs = 5;
  try {
    (void)train_msgaf(data, cfg);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch >= 1);
    CHECK_FALSE(e.param_norms.empty());
  }
}

TEST_CASE("prediction does not modify parameters") {
  const simkit::Dataset ds = small_dataset(20, 9);
  const PreparedData data = prepare_data(ds, 90);
  const MsgafRegressor model(MsgafModel(small_config(ds.topology.size()), 1), data.adjacency);
  const ParamSet before = model.params();
  const auto p1 = predict(model, data.examples);
  CHECK(model.params() == before);
  CHECK(predict(model, data.examples) == p1);
}
