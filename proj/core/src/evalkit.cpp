#include "msgaf/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "msgaf/simkit.hpp"

namespace msgaf::evalkit {

MetricReport compute_metrics(std::span<const double> predictions, std::span<const double> targets, int percentile) {
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty input");
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(targets.size()) + " targets");
  }
  (void)simkit::percentile_index(percentile);
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    pct_sum += std::abs(d) / std::max(targets[i], kMapeFloor);
  }
  const double n = static_cast<double>(predictions.size());
  MetricReport r;
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  r.mape = 100.0 * pct_sum / n;
  r.percentile = percentile;
  r.n_samples = predictions.size();
  return r;
}

Matrix pooled_features(const Matrix& x) {
  Matrix out(1, x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  }
  const double n = static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) /= n;
  return out;
}

std::vector<Example> pool_examples(std::span<const Example> examples) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back({pooled_features(e.input), e.target});
  return out;
}

// ---- linear -----------------------------------------------------------------

LinearBaseline::LinearBaseline(Matrix weights, double intercept)
    : weights_(std::move(weights)), intercept_(intercept) {
  if (weights_.cols() != 1) throw ShapeError("linear weights must be m x 1, got " + shape_str(weights_));
}

double LinearBaseline::predict(const Matrix& input) const {
  if (input.rows() != 1 || input.cols() != weights_.rows()) {
    throw ShapeError("linear baseline expects 1 x " + std::to_string(weights_.rows()) + " input, got " +
                     shape_str(input));
  }
  double y = intercept_;
  for (std::size_t j = 0; j < input.cols(); ++j) y += input(0, j) * weights_(j, 0);
  return y;
}

std::vector<double> LinearBaseline::predict(std::span<const Example> examples) const {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(predict(e.input));
  return out;
}

LinearBaseline fit_linear_baseline(std::span<const Example> train) {
  if (train.empty()) throw std::invalid_argument("fit_linear_baseline: empty training set");
  const std::size_t m = train.front().input.cols();
  if (train.size() < m + 1) {
    throw std::invalid_argument("fit_linear_baseline: need at least " + std::to_string(m + 1) + " samples, got " +
                                std::to_string(train.size()));
  }
  const double n = static_cast<double>(train.size());
  std::vector<double> mean_x(m, 0.0);
  double mean_y = 0.0;
  for (const Example& e : train) {
    if (e.input.rows() != 1 || e.input.cols() != m) throw ShapeError("inconsistent baseline input " + shape_str(e.input));
    for (std::size_t j = 0; j < m; ++j) mean_x[j] += e.input(0, j);
    mean_y += e.target;
  }
  for (double& v : mean_x) v /= n;
  mean_y /= n;

  Matrix gram(m, m, 0.0);
  Matrix rhs(m, 1, 0.0);
  for (const Example& e : train) {
    const double dy = e.target - mean_y;
    for (std::size_t i = 0; i < m; ++i) {
      const double di = e.input(0, i) - mean_x[i];
      rhs(i, 0) += di * dy;
      for (std::size_t j = 0; j < m; ++j) gram(i, j) += di * (e.input(0, j) - mean_x[j]);
    }
  }
  for (std::size_t i = 0; i < m; ++i) gram(i, i) += LinearBaseline::kRidge;
  Matrix w = solve_spd(gram, rhs);
  double intercept = mean_y;
  for (std::size_t j = 0; j < m; ++j) intercept -= w(j, 0) * mean_x[j];
  return LinearBaseline(std::move(w), intercept);
}

// ---- mlp --------------------------------------------------------------------

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols, 0.0);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

}  // namespace

MlpBaseline::MlpBaseline(std::size_t input_dim, const MlpConfig& cfg, std::uint64_t seed) {
  if (input_dim == 0 || cfg.hidden1 == 0 || cfg.hidden2 == 0) throw std::invalid_argument("MLP dimensions must be positive");
  std::mt19937_64 rng(seed);
  params_.add("mlp.w1", glorot(input_dim, cfg.hidden1, rng));
  params_.add("mlp.b1", Matrix(1, cfg.hidden1, 0.0));
  params_.add("mlp.w2", glorot(cfg.hidden1, cfg.hidden2, rng));
  params_.add("mlp.b2", Matrix(1, cfg.hidden2, 0.0));
  params_.add("mlp.w3", glorot(cfg.hidden2, 1, rng));
  params_.add("mlp.b3", Matrix(1, 1, 0.0));
}

BatchOutputs MlpBaseline::forward_batch(std::span<const Var> leaves, std::span<const Example* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
  std::vector<Var> rows;
  Tape& tape = *leaves.front().tape();
  rows.reserve(batch.size());
  for (const Example* e : batch) rows.push_back(tape.constant(e->input));
  Var x = ad::concat_rows(rows);
  Var h1 = ad::relu(ad::add_row(ad::matmul(x, leaves[0]), leaves[1]));
  Var h2 = ad::relu(ad::add_row(ad::matmul(h1, leaves[2]), leaves[3]));
  return {ad::add_row(ad::matmul(h2, leaves[4]), leaves[5]), Var{}};
}

MlpBaseline fit_mlp_baseline(std::span<const Example> train_set, std::span<const Example> val,
                             const MlpConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("fit_mlp_baseline: empty training set");
  MlpBaseline model(train_set.front().input.cols(), cfg, cfg.train.seed);
  TrainConfig tc = cfg.train;
  tc.loss.lambda_kl = 0.0;
  train(model, train_set, val, tc);
  return model;
}

// ---- tables -----------------------------------------------------------------

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

ResultTable make_table(std::vector<RunResult> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) {
    return a.variant != b.variant ? a.variant < b.variant : a.seed < b.seed;
  });
  ResultTable t;
  t.runs = std::move(runs);
  for (std::size_t i = 0; i < t.runs.size();) {
    std::size_t j = i;
    std::vector<double> mae, rmse, mape;
    while (j < t.runs.size() && t.runs[j].variant == t.runs[i].variant) {
      mae.push_back(t.runs[j].mae);
      rmse.push_back(t.runs[j].rmse);
      mape.push_back(t.runs[j].mape);
      ++j;
    }
    SummaryRow row;
    row.variant = t.runs[i].variant;
    row.runs = j - i;
    mean_std(mae, row.mae_mean, row.mae_std);
    mean_std(rmse, row.rmse_mean, row.rmse_std);
    mean_std(mape, row.mape_mean, row.mape_std);
    t.rows_.push_back(row);
    i = j;
  }
  return t;
}

std::vector<SummaryRow> ResultTable::summary() const { return rows_; }

const SummaryRow* ResultTable::find(const std::string& variant) const {
  for (const auto& r : rows_) {
    if (r.variant == variant) return &r;
  }
  return nullptr;
}

std::string ResultTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) {
    arr.push_back({{"variant", r.variant},
                   {"percentile", r.percentile},
                   {"seed", r.seed},
                   {"mae", r.mae},
                   {"rmse", r.rmse},
                   {"mape", r.mape}});
  }
  return arr.dump(2);
}

std::string ResultTable::to_text() const {
  std::size_t width = 7;
  for (const auto& r : rows_) width = std::max(width, r.variant.size());
  auto cell = [](double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%10.4f +- %-9.4f", mean, sd);
    return std::string(buf);
  };
  std::string out;
  char head[160];
  std::snprintf(head, sizeof head, "%-*s  %4s  %-23s  %-23s  %-23s\n", static_cast<int>(width), "variant", "runs",
                "MAE (ms)", "RMSE (ms)", "MAPE (%)");
  out += head;
  for (const auto& r : rows_) {
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %4zu  %s  %s  %s\n", static_cast<int>(width), r.variant.c_str(), r.runs,
                  cell(r.mae_mean, r.mae_std).c_str(), cell(r.rmse_mean, r.rmse_std).c_str(),
                  cell(r.mape_mean, r.mape_std).c_str());
    out += line;
  }
  return out;
}

// ---- runners ----------------------------------------------------------------

RunResult run_single(const PreparedData& data, const ExperimentConfig& cfg, std::string label) {
  TrainedMsgaf trained = train_msgaf(data, cfg);
  const std::vector<double> preds = predict_ms(trained.regressor, data.test(), data.target_scale);
  const MetricReport m = compute_metrics(preds, data.test_targets_ms(), data.percentile);
  return {std::move(label), data.percentile, cfg.train.seed, m.mae, m.rmse, m.mape};
}

namespace {

struct Job {
  ExperimentConfig cfg;
  std::string label;
};

ResultTable run_grid(const PreparedData& data, std::vector<Job> jobs, const GridOptions& options) {
  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, jobs.size());
  auto worker = [&](std::size_t offset) {
    for (std::size_t i = offset; i < jobs.size(); i += threads) {
      try {
        results[i] = run_single(data, jobs[i].cfg, jobs[i].label);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return make_table(std::move(results));
}

void require_seeds(std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 3) throw std::invalid_argument("need at least 3 seeds, got " + std::to_string(seeds.size()));
}

}  // namespace

ResultTable run_ablation(const PreparedData& data, std::span<const Variant> variants,
                         std::span<const std::uint64_t> seeds, const ExperimentConfig& base,
                         const GridOptions& options) {
  require_seeds(seeds);
  std::vector<Variant> vs(variants.begin(), variants.end());
  if (std::find(vs.begin(), vs.end(), Variant::kFull) == vs.end()) vs.insert(vs.begin(), Variant::kFull);
  std::vector<Job> jobs;
  for (Variant v : vs) {
    for (std::uint64_t s : seeds) {
      ExperimentConfig cfg = base;
      cfg.model.variant = v;
      cfg.train.seed = s;
      jobs.push_back({cfg, std::string(to_string(v))});
    }
  }
  return run_grid(data, std::move(jobs), options);
}

ResultTable run_level_sweep(const PreparedData& data, std::span<const std::size_t> levels,
                            std::span<const std::uint64_t> seeds, const ExperimentConfig& base,
                            const GridOptions& options) {
  require_seeds(seeds);
  if (levels.empty()) throw std::invalid_argument("run_level_sweep: no level counts given");
  std::vector<Job> jobs;
  for (std::size_t l : levels) {
    for (std::uint64_t s : seeds) {
      ExperimentConfig cfg = base;
      cfg.model.variant = Variant::kFull;
      cfg.model.levels = l;
      cfg.model.validate();
      cfg.train.seed = s;
      jobs.push_back({cfg, "levels=" + std::to_string(l)});
    }
  }
  return run_grid(data, std::move(jobs), options);
}

}  // namespace msgaf::evalkit
