#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "msgaf/checkpoint.hpp"
#include "msgaf/dataset_io.hpp"
#include "msgaf/evalkit.hpp"
#include "msgaf/experiment.hpp"
#include "msgaf/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

constexpr const char* kCheckpointFile = "checkpoint.msgaf";
constexpr const char* kConfigEcho = "config.json";

struct Overrides {
  std::string config_path;
  std::optional<std::string> template_name, trace, variant, data_dir, out_dir;
  std::optional<std::size_t> windows, levels, max_epochs, patience, batch_size, threads;
  std::optional<std::uint64_t> seed;
  std::optional<int> percentile;
  std::optional<double> lambda_kl, lr, base_rps;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--template", template_name, "boutique11, sockshop13 or random");
    cmd->add_option("--trace", trace, "smooth or bursty");
    cmd->add_option("--windows", windows, "number of windows");
    cmd->add_option("--base-rps", base_rps, "mean entry request rate");
    cmd->add_option("--seed", seed, "data, init and shuffle seed");
    cmd->add_option("--percentile", percentile, "target percentile (50, 90, 99)");
    cmd->add_option("--variant", variant, "full, no_multiscale, no_fusion or no_scene");
    cmd->add_option("--levels", levels, "number of scale levels (1-4)");
    cmd->add_option("--lambda-kl", lambda_kl, "weight of the expert diversity term");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--batch-size", batch_size, "mini-batch size");
    cmd->add_option("--max-epochs", max_epochs, "epoch cap");
    cmd->add_option("--patience", patience, "early stopping patience");
    cmd->add_option("--threads", threads, "worker threads for ablate/sweep");
    cmd->add_option("--data-dir", data_dir, "dataset directory");
    cmd->add_option("--out-dir", out_dir, "output directory");
  }

  msgaf::RunConfig resolve() const {
    msgaf::RunConfig c = config_path.empty() ? msgaf::RunConfig{} : msgaf::RunConfig::load(config_path);
    if (template_name) c.template_name = *template_name;
    if (trace) c.trace = *trace;
    if (windows) c.windows = *windows;
    if (base_rps) c.base_rps = *base_rps;
    if (seed) c.seed = *seed;
    if (percentile) c.percentile = *percentile;
    if (variant) c.variant = *variant;
    if (levels) c.levels = *levels;
    if (lambda_kl) c.lambda_kl = *lambda_kl;
    if (lr) c.lr = *lr;
    if (batch_size) c.batch_size = *batch_size;
    if (max_epochs) c.max_epochs = *max_epochs;
    if (patience) c.patience = *patience;
    if (threads) c.threads = *threads;
    if (data_dir) c.data_dir = *data_dir;
    if (out_dir) c.out_dir = *out_dir;
    c.validate();
    return c;
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

void echo_config(const msgaf::RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / kConfigEcho, cfg.to_json());
}

json metrics_json(const msgaf::evalkit::MetricReport& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"mape", m.mape}, {"percentile", m.percentile}, {"n_samples", m.n_samples}};
}

void print_metrics(const char* label, const msgaf::evalkit::MetricReport& m) {
  std::printf("%s P%d: MAE %.4f ms  RMSE %.4f ms  MAPE %.3f%%  (n=%zu)\n", label, m.percentile, m.mae, m.rmse,
              m.mape, m.n_samples);
}

msgaf::TrainedMsgaf load_trained(const msgaf::RunConfig& cfg, const msgaf::simkit::Topology& topology) {
  const msgaf::Checkpoint ckpt = msgaf::load_checkpoint(fs::path(cfg.out_dir) / kCheckpointFile);
  return msgaf::TrainedMsgaf::from_checkpoint(ckpt, cfg.model_config(topology.size()), cfg.percentile,
                                              topology.graph.adjacency);
}

int cmd_generate(const msgaf::RunConfig& cfg) {
  const msgaf::simkit::Dataset ds = msgaf::simkit::generate_dataset(cfg.dataset_spec());
  msgaf::simkit::write_dataset(ds, cfg.data_dir);
  echo_config(cfg, cfg.data_dir);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& r : ds.records) ++counts[static_cast<int>(r.scenario)];
  std::printf("wrote %zu windows of %s (%zu services) to %s\n", ds.records.size(), ds.topology.name().c_str(),
              ds.topology.size(), cfg.data_dir.c_str());
  std::printf("scenarios: cpu %zu  io %zu  network %zu  mixed %zu\n", counts[0], counts[1], counts[2], counts[3]);
  if (!ds.saturated_windows.empty()) std::printf("saturated windows: %zu\n", ds.saturated_windows.size());
  return 0;
}

int cmd_train(const msgaf::RunConfig& cfg) {
  const msgaf::simkit::Dataset ds = msgaf::simkit::read_dataset(cfg.data_dir);
  const msgaf::PreparedData data = msgaf::prepare_data(ds, cfg.percentile);
  const fs::path out(cfg.out_dir);
  echo_config(cfg, out);

  std::ofstream log(out / "train_log.jsonl");
  auto on_epoch = [&](const msgaf::EpochLog& e) {
    log << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}}.dump()
        << '\n';
    log.flush();
  };
  const msgaf::TrainedMsgaf trained = msgaf::train_msgaf(data, cfg.experiment_config(ds.topology.size()), on_epoch);
  msgaf::save_checkpoint(trained.to_checkpoint(), out / kCheckpointFile);

  auto score = [&](std::span<const msgaf::Example> split, std::span<const double> targets) {
    return msgaf::evalkit::compute_metrics(msgaf::predict_ms(trained.regressor, split, data.target_scale), targets,
                                           data.percentile);
  };
  const std::span<const double> all_targets(data.targets_ms);
  const auto val = score(data.val(), all_targets.subspan(data.split.train_end,
                                                         data.split.val_end - data.split.train_end));
  const auto test = score(data.test(), data.test_targets_ms());
  json report = {{"best_epoch", trained.result.best_epoch},
                 {"epochs_run", trained.result.epochs_run},
                 {"best_val_loss", trained.result.best_val_loss},
                 {"val", metrics_json(val)},
                 {"test", metrics_json(test)}};
  write_file(out / "train_report.json", report.dump(2));
  std::printf("best epoch %zu of %zu, val loss %.6g\n", trained.result.best_epoch, trained.result.epochs_run,
              trained.result.best_val_loss);
  print_metrics("val ", val);
  print_metrics("test", test);
  return 0;
}

int cmd_evaluate(const msgaf::RunConfig& cfg) {
  const msgaf::simkit::Dataset ds = msgaf::simkit::read_dataset(cfg.data_dir);
  const msgaf::TrainedMsgaf trained = load_trained(cfg, ds.topology);
  msgaf::PreparedData data = msgaf::prepare_data(ds, cfg.percentile);
  if (!(data.normalizer == trained.normalizer) || data.target_scale != trained.target_scale) {
    throw std::runtime_error("dataset preprocessing differs from the checkpoint; was it trained on " + cfg.data_dir +
                             "?");
  }
  const auto preds = msgaf::predict_ms(trained.regressor, data.test(), trained.target_scale);
  const auto diag = msgaf::infer(trained.regressor, data.test());
  const auto m = msgaf::evalkit::compute_metrics(preds, data.test_targets_ms(), cfg.percentile);

  const fs::path out(cfg.out_dir);
  write_file(out / "metrics.json", metrics_json(m).dump(2));
  std::ofstream log(out / "inference_log.jsonl");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t idx = data.split.val_end + i;
    log << json{{"window_id", data.window_ids[idx]},
                {"scenario", msgaf::simkit::to_string(ds.records[idx].scenario)},
                {"prediction", preds[i]},
                {"target", data.targets_ms[idx]},
                {"beta", diag[i].beta},
                {"omega", diag[i].omega},
                {"expert_outputs", diag[i].expert_outputs}}
               .dump()
        << '\n';
  }
  print_metrics("test", m);
  return 0;
}

int cmd_predict(const msgaf::RunConfig& cfg, const std::string& record_path) {
  std::string text;
  if (record_path.empty() || record_path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(record_path);
    if (!in) throw std::runtime_error("cannot read record file " + record_path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const msgaf::simkit::Topology topology =
      msgaf::simkit::read_dataset(cfg.data_dir).topology;
  const msgaf::TrainedMsgaf trained = load_trained(cfg, topology);
  const msgaf::simkit::WindowRecord record = msgaf::simkit::record_from_json(text, topology.size());
  const msgaf::Example ex = msgaf::make_example(record, trained.normalizer, trained.target_scale, cfg.percentile);
  const double pred = msgaf::predict_ms(trained.regressor, std::span(&ex, 1), trained.target_scale).front();
  const auto diag = msgaf::infer(trained.regressor, std::span(&ex, 1)).front();
  std::cout << json{{"window_id", record.window_id},
                    {"latency_ms", pred},
                    {"percentile", cfg.percentile},
                    {"omega", diag.omega},
                    {"beta", diag.beta}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_grid(const msgaf::RunConfig& cfg, bool sweep) {
  const msgaf::simkit::Dataset ds = msgaf::simkit::read_dataset(cfg.data_dir);
  const msgaf::PreparedData data = msgaf::prepare_data(ds, cfg.percentile);
  const msgaf::ExperimentConfig base = cfg.experiment_config(ds.topology.size());
  const msgaf::evalkit::GridOptions options{cfg.threads};
  const msgaf::evalkit::ResultTable table =
      sweep ? msgaf::evalkit::run_level_sweep(data, cfg.sweep_levels, cfg.seeds, base, options)
            : msgaf::evalkit::run_ablation(data, cfg.variant_list(), cfg.seeds, base, options);
  const fs::path out(cfg.out_dir);
  echo_config(cfg, out);
  write_file(out / (sweep ? "level_sweep.json" : "ablation.json"), table.to_json());
  std::fputs(table.to_text().c_str(), stdout);
  if (!sweep) {
    const auto* full = table.find("full");
    const auto* micro = table.find("no_multiscale");
    if (full && micro && full->mae_mean > micro->mae_mean) {
      std::fprintf(stderr, "warning: full MAE %.4f exceeds no_multiscale MAE %.4f\n", full->mae_mean,
                   micro->mae_mean);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale graph attention latency estimator"};
  app.require_subcommand(1);

  Overrides gen, trn, evl, prd, abl, swp;
  std::string record_path;
  CLI::App* c_gen = app.add_subcommand("generate", "simulate a dataset");
  CLI::App* c_trn = app.add_subcommand("train", "train a model on a dataset");
  CLI::App* c_evl = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  CLI::App* c_prd = app.add_subcommand("predict", "estimate latency for one window record");
  CLI::App* c_abl = app.add_subcommand("ablate", "ablation grid over variants and seeds");
  CLI::App* c_swp = app.add_subcommand("sweep", "level-count sweep over seeds");
  gen.attach(c_gen);
  trn.attach(c_trn);
  evl.attach(c_evl);
  prd.attach(c_prd);
  abl.attach(c_abl);
  swp.attach(c_swp);
  c_prd->add_option("--record", record_path, "file holding one JSON window record ('-' for stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  msgaf::RunConfig cfg;
  try {
    if (c_gen->parsed()) cfg = gen.resolve();
    if (c_trn->parsed()) cfg = trn.resolve();
    if (c_evl->parsed()) cfg = evl.resolve();
    if (c_prd->parsed()) cfg = prd.resolve();
    if (c_abl->parsed()) cfg = abl.resolve();
    if (c_swp->parsed()) cfg = swp.resolve();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsageError;
  }

  try {
    if (c_gen->parsed()) return cmd_generate(cfg);
    if (c_trn->parsed()) return cmd_train(cfg);
    if (c_evl->parsed()) return cmd_evaluate(cfg);
    if (c_prd->parsed()) return cmd_predict(cfg, record_path);
    if (c_abl->parsed()) return cmd_grid(cfg, false);
    if (c_swp->parsed()) return cmd_grid(cfg, true);
  } catch (const msgaf::TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kUsageError;
}
