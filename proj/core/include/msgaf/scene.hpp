#pragma once

#include <cstddef>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf::scene {

/// Two-layer ReLU regressor. w1: d' x h_e, b1: 1 x h_e, w2: h_e x 1, b2: 1 x 1.
struct ExpertParams {
  Matrix w1, b1, w2, b2;
};

/// Recognizer (w_s1: d' x d_s1, w_s2: d_s1 x d_s), gate (w_gate: d_s x K)
/// and K experts. Vectors are 1 x n rows.
struct SceneParams {
  Matrix w_s1, b_s1, w_s2, b_s2;
  Matrix w_gate, b_gate;
  std::vector<ExpertParams> experts;
};

struct ExpertVars {
  Var w1, b1, w2, b2;
};

/// Recognizer and gate are absent for the single-expert variant.
struct SceneVars {
  bool has_gate = true;
  Var w_s1, b_s1, w_s2, b_s2;
  Var w_gate, b_gate;
  std::vector<ExpertVars> experts;
};

/// s = ReLU(f W_s1 + b_s1) W_s2 + b_s2.
Var recognize(Var f, const SceneVars& params);
/// omega = softmax(s W_gate + b_gate).
Var gate(Var s, const SceneVars& params);
/// E_i(x) = ReLU(ReLU(x W_i1 + b_i1) W_i2 + b_i2), 0-based index.
Var expert(std::size_t i, Var x, const SceneVars& params);

struct EstimateVars {
  Var scene;           // 1 x d_s (unset without a gate)
  Var omega;           // 1 x K
  Var expert_outputs;  // 1 x K
  Var latency;         // 1 x 1
};
/// L = sum_i omega_i E_i(f). Without a gate, K must be 1 and omega = [1].
EstimateVars estimate(Var f, const SceneVars& params);

struct SceneOutput {
  Matrix scene;
  Matrix omega;
  Matrix expert_outputs;
  double latency = 0.0;
};

Matrix recognize(const Matrix& f, const SceneParams& params);
Matrix gate(const Matrix& s, const SceneParams& params);
double expert(std::size_t i, const Matrix& x, const SceneParams& params);
SceneOutput estimate(const Matrix& f, const SceneParams& params);

}  // namespace msgaf::scene
