#include "msgaf/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace msgaf {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoMultiscale: return "no_multiscale";
    case Variant::kNoFusion: return "no_fusion";
    case Variant::kNoScene: return "no_scene";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected full, no_multiscale, no_fusion or no_scene)");
}

std::vector<multiscale::LevelSpec> ModelConfig::schedule() const {
  return multiscale::level_schedule(variant == Variant::kNoMultiscale ? 1 : levels);
}

std::size_t ModelConfig::expert_count() const { return variant == Variant::kNoScene ? 1 : experts; }

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "msgaf-model/1;n=" << nodes << ";d=" << feature_dim << ";h=" << hidden_dim << ";dp=" << attn_dim
     << ";ds1=" << scene_hidden_dim << ";ds=" << scene_dim << ";he=" << expert_hidden_dim << ";K=" << experts
     << ";levels=" << levels << ";variant=" << to_string(variant);
  return os.str();
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
  };
  positive(nodes, "nodes");
  positive(feature_dim, "feature_dim");
  positive(hidden_dim, "hidden_dim");
  positive(attn_dim, "attn_dim");
  positive(scene_hidden_dim, "scene_hidden_dim");
  positive(scene_dim, "scene_dim");
  positive(expert_hidden_dim, "expert_hidden_dim");
  positive(experts, "experts");
  (void)multiscale::level_schedule(levels);
}

namespace {

std::string level_prefix(std::size_t l) { return "level" + std::to_string(l) + "."; }
std::string expert_prefix(std::size_t i) { return "scene.expert" + std::to_string(i) + "."; }

}  // namespace

ParamSet MsgafModel::expected_shapes(const ModelConfig& c) {
  ParamSet p;
  const auto schedule = c.schedule();
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const std::string pre = level_prefix(l);
    if (!schedule[l].is_micro()) {
      const std::size_t k = multiscale::level_size(c.nodes, schedule[l]);
      p.add(pre + "coarsen.weight", Matrix(c.feature_dim, k));
      p.add(pre + "coarsen.bias", Matrix(1, k));
    }
    p.add(pre + "gat.embed", Matrix(c.feature_dim, c.hidden_dim));
    p.add(pre + "gat.transform", Matrix(c.hidden_dim, c.attn_dim));
    p.add(pre + "gat.attention", Matrix(2 * c.attn_dim, 1));
  }
  if (c.learnable_fusion()) {
    p.add("fusion.weight", Matrix(1, c.attn_dim));
    p.add("fusion.bias", Matrix(1, 1));
  }
  if (c.has_gate()) {
    p.add("scene.recognizer.w1", Matrix(c.attn_dim, c.scene_hidden_dim));
    p.add("scene.recognizer.b1", Matrix(1, c.scene_hidden_dim));
    p.add("scene.recognizer.w2", Matrix(c.scene_hidden_dim, c.scene_dim));
    p.add("scene.recognizer.b2", Matrix(1, c.scene_dim));
    p.add("scene.gate.weight", Matrix(c.scene_dim, c.experts));
    p.add("scene.gate.bias", Matrix(1, c.experts));
  }
  for (std::size_t i = 0; i < c.expert_count(); ++i) {
    const std::string pre = expert_prefix(i);
    p.add(pre + "w1", Matrix(c.attn_dim, c.expert_hidden_dim));
    p.add(pre + "b1", Matrix(1, c.expert_hidden_dim));
    p.add(pre + "w2", Matrix(c.expert_hidden_dim, 1));
    p.add(pre + "b2", Matrix(1, 1));
  }
  return p;
}

MsgafModel::MsgafModel(ModelConfig config, std::uint64_t seed, double output_bias) : config_(std::move(config)) {
  config_.validate();
  params_ = expected_shapes(config_);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    Matrix& m = params_[i];
    const bool is_bias = name.ends_with("bias") || name.ends_with(".b1") || name.ends_with(".b2");
    if (is_bias) {
      if (name.starts_with("scene.expert") && name.ends_with(".b2")) m.fill(output_bias);
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : m.data()) v = dist(rng);
  }
  build_layout();
}

MsgafModel::MsgafModel(ModelConfig config, ParamSet params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const ParamSet expected = expected_shapes(config_);
  if (expected.size() != params_.size()) {
    throw std::invalid_argument("parameter set has " + std::to_string(params_.size()) + " tensors, model expects " +
                                std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected.name(i) != params_.name(i) || !expected[i].same_shape(params_[i])) {
      throw std::invalid_argument("parameter " + std::to_string(i) + " is '" + params_.name(i) + "' " +
                                  shape_str(params_[i]) + ", expected '" + expected.name(i) + "' " +
                                  shape_str(expected[i]));
    }
  }
  build_layout();
}

void MsgafModel::build_layout() {
  const auto schedule = config_.schedule();
  Layout l;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const std::string pre = level_prefix(i);
    l.coarsen_weight.push_back(params_.find(pre + "coarsen.weight"));
    l.coarsen_bias.push_back(params_.find(pre + "coarsen.bias"));
    l.embed.push_back(params_.index_of(pre + "gat.embed"));
    l.transform.push_back(params_.index_of(pre + "gat.transform"));
    l.attention.push_back(params_.index_of(pre + "gat.attention"));
  }
  l.fusion_weight = params_.find("fusion.weight");
  l.fusion_bias = params_.find("fusion.bias");
  l.w_s1 = params_.find("scene.recognizer.w1");
  l.b_s1 = params_.find("scene.recognizer.b1");
  l.w_s2 = params_.find("scene.recognizer.w2");
  l.b_s2 = params_.find("scene.recognizer.b2");
  l.w_gate = params_.find("scene.gate.weight");
  l.b_gate = params_.find("scene.gate.bias");
  for (std::size_t i = 0; i < config_.expert_count(); ++i) {
    const std::string pre = expert_prefix(i);
    l.e_w1.push_back(params_.index_of(pre + "w1"));
    l.e_b1.push_back(params_.index_of(pre + "b1"));
    l.e_w2.push_back(params_.index_of(pre + "w2"));
    l.e_b2.push_back(params_.index_of(pre + "b2"));
  }
  layout_ = std::move(l);
}

ModelVars MsgafModel::view(std::span<const Var> leaves) const {
  if (leaves.size() != params_.size()) throw std::invalid_argument("view: leaf count does not match parameter count");
  const Layout& l = layout_;
  ModelVars v;
  for (std::size_t i = 0; i < l.embed.size(); ++i) {
    if (l.coarsen_weight[i]) {
      v.coarsen.push_back(multiscale::CoarsenVars{leaves[*l.coarsen_weight[i]], leaves[*l.coarsen_bias[i]]});
    } else {
      v.coarsen.push_back(std::nullopt);
    }
    v.gat.push_back({leaves[l.embed[i]], leaves[l.transform[i]], leaves[l.attention[i]]});
  }
  if (l.fusion_weight) v.fusion = fusion::FusionVars{leaves[*l.fusion_weight], leaves[*l.fusion_bias]};
  v.scene.has_gate = l.w_gate.has_value();
  if (v.scene.has_gate) {
    v.scene.w_s1 = leaves[*l.w_s1];
    v.scene.b_s1 = leaves[*l.b_s1];
    v.scene.w_s2 = leaves[*l.w_s2];
    v.scene.b_s2 = leaves[*l.b_s2];
    v.scene.w_gate = leaves[*l.w_gate];
    v.scene.b_gate = leaves[*l.b_gate];
  }
  for (std::size_t i = 0; i < l.e_w1.size(); ++i) {
    v.scene.experts.push_back({leaves[l.e_w1[i]], leaves[l.e_b1[i]], leaves[l.e_w2[i]], leaves[l.e_b2[i]]});
  }
  return v;
}

Forward MsgafModel::forward(const ModelVars& vars, Var x, Var a) const {
  if (x.rows() != config_.nodes || x.cols() != config_.feature_dim) {
    throw ShapeError("forward: features " + shape_str(x.value()) + " do not match model (" +
                     std::to_string(config_.nodes) + "x" + std::to_string(config_.feature_dim) + ")");
  }
  const auto schedule = config_.schedule();
  Forward out;
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const auto& cv = vars.coarsen[l];
    multiscale::ScaleVars level = multiscale::build_level(x, a, schedule[l], cv ? &*cv : nullptr);
    out.level_embeddings.push_back(gat::encode_level(level.features, level.adjacency, vars.gat[l]).embedding);
  }
  fusion::FusedVars fused = fusion::fuse(out.level_embeddings, vars.fusion ? &*vars.fusion : nullptr);
  scene::EstimateVars est = scene::estimate(fused.fused, vars.scene);
  out.latency = est.latency;
  out.expert_outputs = est.expert_outputs;
  out.omega = est.omega;
  out.beta = fused.beta;
  return out;
}

}  // namespace msgaf
