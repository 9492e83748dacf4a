#pragma once

#include <span>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf::fusion {

/// Scores one level embedding: weight is 1 x d', bias is 1 x 1.
struct FusionParams {
  Matrix weight;
  Matrix bias;
};

struct FusionVars {
  Var weight;
  Var bias;
};

struct FusedVars {
  Var beta;   // 1 x L
  Var fused;  // 1 x d'
};

/// beta = softmax_l(W_beta . h_l + b_beta); f = sum_l beta_l h_l.
/// With `params == nullptr` the weights are fixed at 1/L.
FusedVars fuse(std::span<const Var> embeddings, const FusionVars* params);

struct FusedState {
  Matrix beta;
  Matrix fused;
};

FusedState fuse(std::span<const Matrix> embeddings, const FusionParams& params);

}  // namespace msgaf::fusion
