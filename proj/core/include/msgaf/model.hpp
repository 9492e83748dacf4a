#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msgaf/fusion.hpp"
#include "msgaf/gat.hpp"
#include "msgaf/multiscale.hpp"
#include "msgaf/params.hpp"
#include "msgaf/scene.hpp"

namespace msgaf {

enum class Variant { kFull, kNoMultiscale, kNoFusion, kNoScene };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoMultiscale, Variant::kNoFusion,
                                           Variant::kNoScene};

struct ModelConfig {
  std::size_t nodes = 11;
  std::size_t feature_dim = 9;
  std::size_t hidden_dim = 64;         // h
  std::size_t attn_dim = 64;           // d'
  std::size_t scene_hidden_dim = 64;   // d_s1
  std::size_t scene_dim = 32;          // d_s
  std::size_t expert_hidden_dim = 64;  // h_e
  std::size_t experts = 4;             // K
  std::size_t levels = 3;
  Variant variant = Variant::kFull;

  /// Branches actually built; no_multiscale keeps the micro level only.
  std::vector<multiscale::LevelSpec> schedule() const;
  /// Experts actually built; no_scene keeps one.
  std::size_t expert_count() const;
  bool learnable_fusion() const { return variant != Variant::kNoFusion; }
  bool has_gate() const { return variant != Variant::kNoScene; }

  /// Stable textual form of every field that shapes the parameter set.
  std::string canonical() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Views of every model tensor bound on one tape.
struct ModelVars {
  std::vector<std::optional<multiscale::CoarsenVars>> coarsen;
  std::vector<gat::GatVars> gat;
  std::optional<fusion::FusionVars> fusion;
  scene::SceneVars scene;
};

/// Per-sample outputs; all are 1 x m rows except latency (1 x 1).
struct Forward {
  Var latency;
  Var expert_outputs;
  Var omega;
  Var beta;
  std::vector<Var> level_embeddings;
};

/// The full estimator: per-level coarsening and attention, adaptive fusion,
/// scene recognizer, gate and experts. Output is in the scaled target unit
/// chosen by the caller.
class MsgafModel {
 public:
  /// Glorot-uniform weights, zero biases except expert output biases, which
  /// start at `output_bias` so that the ReLU-terminated experts are active.
  MsgafModel(ModelConfig config, std::uint64_t seed, double output_bias = 1.0);
  /// Adopts an existing parameter set; names and shapes must match `config`.
  MsgafModel(ModelConfig config, ParamSet params);

  const ModelConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  /// `leaves` must be aligned with params() (see ParamSet::bind).
  ModelVars view(std::span<const Var> leaves) const;

  /// x: normalized n x (d+2) features, a: n x n adjacency; both constants.
  Forward forward(const ModelVars& vars, Var x, Var a) const;

 private:
  struct Layout {
    std::vector<std::optional<std::size_t>> coarsen_weight, coarsen_bias;
    std::vector<std::size_t> embed, transform, attention;
    std::optional<std::size_t> fusion_weight, fusion_bias;
    std::optional<std::size_t> w_s1, b_s1, w_s2, b_s2, w_gate, b_gate;
    std::vector<std::size_t> e_w1, e_b1, e_w2, e_b2;
  };
  static ParamSet expected_shapes(const ModelConfig& config);
  void build_layout();

  ModelConfig config_;
  ParamSet params_;
  Layout layout_;
};

}  // namespace msgaf
