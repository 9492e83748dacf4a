#include "msgaf/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace msgaf {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const char* const kKeys[] = {
      "template",   "random_nodes", "windows",    "trace",         "base_rps",    "scenario_mix", "noise",
      "hidden_dim", "attn_dim",     "scene_hidden_dim", "scene_dim", "expert_hidden_dim", "num_experts",
      "levels",     "variant",      "lambda_kl",  "kl_epsilon",    "lr",          "batch_size",   "max_epochs",
      "patience",   "seed",         "percentile", "seeds",         "variants",    "sweep_levels", "threads",
      "data_dir",   "out_dir"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  RunConfig c;
  take(j, "template", c.template_name);
  take(j, "random_nodes", c.random_nodes);
  take(j, "windows", c.windows);
  take(j, "trace", c.trace);
  take(j, "base_rps", c.base_rps);
  take(j, "scenario_mix", c.scenario_mix);
  take(j, "noise", c.noise);
  take(j, "hidden_dim", c.hidden_dim);
  take(j, "attn_dim", c.attn_dim);
  take(j, "scene_hidden_dim", c.scene_hidden_dim);
  take(j, "scene_dim", c.scene_dim);
  take(j, "expert_hidden_dim", c.expert_hidden_dim);
  take(j, "num_experts", c.num_experts);
  take(j, "levels", c.levels);
  take(j, "variant", c.variant);
  take(j, "lambda_kl", c.lambda_kl);
  take(j, "kl_epsilon", c.kl_epsilon);
  take(j, "lr", c.lr);
  take(j, "batch_size", c.batch_size);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "seed", c.seed);
  take(j, "percentile", c.percentile);
  take(j, "seeds", c.seeds);
  take(j, "variants", c.variants);
  take(j, "sweep_levels", c.sweep_levels);
  take(j, "threads", c.threads);
  take(j, "data_dir", c.data_dir);
  take(j, "out_dir", c.out_dir);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json() const {
  json j = {{"template", template_name},
            {"random_nodes", random_nodes},
            {"windows", windows},
            {"trace", trace},
            {"base_rps", base_rps},
            {"scenario_mix", scenario_mix},
            {"noise", noise},
            {"hidden_dim", hidden_dim},
            {"attn_dim", attn_dim},
            {"scene_hidden_dim", scene_hidden_dim},
            {"scene_dim", scene_dim},
            {"expert_hidden_dim", expert_hidden_dim},
            {"num_experts", num_experts},
            {"levels", levels},
            {"variant", variant},
            {"lambda_kl", lambda_kl},
            {"kl_epsilon", kl_epsilon},
            {"lr", lr},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed},
            {"percentile", percentile},
            {"seeds", seeds},
            {"variants", variants},
            {"sweep_levels", sweep_levels},
            {"threads", threads},
            {"data_dir", data_dir},
            {"out_dir", out_dir}};
  return j.dump(2);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
  };
  if (template_name != "boutique11" && template_name != "sockshop13" && template_name != "random") {
    fail("template", "expected boutique11, sockshop13 or random, got '" + template_name + "'");
  }
  if (template_name == "random" && random_nodes < 2) fail("random_nodes", "must be >= 2");
  if (windows < 3) fail("windows", "must be >= 3");
  try {
    (void)simkit::parse_trace(trace);
  } catch (const std::exception& e) {
    fail("trace", e.what());
  }
  if (!(base_rps > 0.0)) fail("base_rps", "must be positive");
  if (scenario_mix.size() != 4) fail("scenario_mix", "needs 4 weights (cpu, io, network, mixed)");
  double total = 0.0;
  for (double w : scenario_mix) {
    if (!(w >= 0.0)) fail("scenario_mix", "weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail("scenario_mix", "weights must not all be zero");
  if (!(noise >= 0.0)) fail("noise", "must be non-negative");
  if (hidden_dim == 0) fail("hidden_dim", "must be positive");
  if (attn_dim == 0) fail("attn_dim", "must be positive");
  if (scene_hidden_dim == 0) fail("scene_hidden_dim", "must be positive");
  if (scene_dim == 0) fail("scene_dim", "must be positive");
  if (expert_hidden_dim == 0) fail("expert_hidden_dim", "must be positive");
  if (num_experts == 0) fail("num_experts", "must be positive");
  if (levels < 1 || levels > 4) fail("levels", "must be in 1..4");
  try {
    (void)parse_variant(variant);
    for (const auto& v : variants) (void)parse_variant(v);
  } catch (const std::exception& e) {
    fail("variant", e.what());
  }
  if (!(lambda_kl >= 0.0)) fail("lambda_kl", "must be non-negative");
  if (!(kl_epsilon > 0.0)) fail("kl_epsilon", "must be positive");
  if (!(lr > 0.0)) fail("lr", "must be positive");
  if (batch_size < 2) fail("batch_size", "must be >= 2");
  if (max_epochs == 0) fail("max_epochs", "must be positive");
  if (patience == 0) fail("patience", "must be positive");
  if (percentile != 50 && percentile != 90 && percentile != 99) fail("percentile", "must be 50, 90 or 99");
  for (std::size_t l : sweep_levels) {
    if (l < 1 || l > 4) fail("sweep_levels", "entries must be in 1..4");
  }
  if (threads == 0) fail("threads", "must be positive");
}

simkit::DatasetSpec RunConfig::dataset_spec() const {
  simkit::DatasetSpec s;
  s.topology = template_name;
  s.random_nodes = random_nodes;
  std::copy(scenario_mix.begin(), scenario_mix.end(), s.mix.weights.begin());
  s.trace = simkit::parse_trace(trace);
  s.base_rps = base_rps;
  s.windows = windows;
  s.seed = seed;
  s.noise = noise;
  return s;
}

ModelConfig RunConfig::model_config(std::size_t nodes) const {
  ModelConfig m;
  m.nodes = nodes;
  m.hidden_dim = hidden_dim;
  m.attn_dim = attn_dim;
  m.scene_hidden_dim = scene_hidden_dim;
  m.scene_dim = scene_dim;
  m.expert_hidden_dim = expert_hidden_dim;
  m.experts = num_experts;
  m.levels = levels;
  m.variant = parse_variant(variant);
  m.validate();
  return m;
}

ExperimentConfig RunConfig::experiment_config(std::size_t nodes) const {
  ExperimentConfig e;
  e.model = model_config(nodes);
  e.train.adam.lr = lr;
  e.train.loss.lambda_kl = lambda_kl;
  e.train.loss.kl_epsilon = kl_epsilon;
  e.train.loss.batch_size = batch_size;
  e.train.max_epochs = max_epochs;
  e.train.patience = patience;
  e.train.seed = seed;
  e.percentile = percentile;
  return e;
}

std::vector<Variant> RunConfig::variant_list() const {
  std::vector<Variant> out;
  for (const auto& v : variants) out.push_back(parse_variant(v));
  return out;
}

}  // namespace msgaf
