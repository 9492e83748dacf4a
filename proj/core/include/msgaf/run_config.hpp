#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "msgaf/experiment.hpp"
#include "msgaf/model.hpp"
#include "msgaf/simkit.hpp"

namespace msgaf {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every knob of a run. Parsed from a JSON object whose keys are the field
/// names below; unknown keys are rejected, missing keys keep their defaults.
struct RunConfig {
  // data generation
  std::string template_name = "boutique11";  // key "template"
  std::size_t random_nodes = 12;
  std::size_t windows = 100;
  std::string trace = "smooth";
  double base_rps = 50.0;
  std::vector<double> scenario_mix = {0.25, 0.25, 0.25, 0.25};  // cpu, io, network, mixed
  double noise = 0.03;

  // model
  std::size_t hidden_dim = 64;
  std::size_t attn_dim = 64;
  std::size_t scene_hidden_dim = 64;
  std::size_t scene_dim = 32;
  std::size_t expert_hidden_dim = 64;
  std::size_t num_experts = 4;
  std::size_t levels = 3;
  std::string variant = "full";

  // training
  double lambda_kl = 0.01;
  double kl_epsilon = 1e-8;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
  int percentile = 90;

  // ablate / sweep
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<std::string> variants = {"full", "no_multiscale", "no_fusion", "no_scene"};
  std::vector<std::size_t> sweep_levels = {1, 2, 3, 4};
  std::size_t threads = 1;

  // paths
  std::string data_dir = "data";
  std::string out_dir = "out";

  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;

  simkit::DatasetSpec dataset_spec() const;
  ModelConfig model_config(std::size_t nodes) const;
  ExperimentConfig experiment_config(std::size_t nodes) const;
  std::vector<Variant> variant_list() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace msgaf
