#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf::gat {

inline constexpr double kNeighborThreshold = 1e-6;
inline constexpr double kLeakySlope = 0.2;

/// Single-head attention layer for one scale level.
///   embed:     (d+2) x h
///   transform: h x d'
///   attention: 2d' x 1, source half first
struct GatParams {
  Matrix embed;
  Matrix transform;
  Matrix attention;
};

struct GatVars {
  Var embed;
  Var transform;
  Var attention;
};

/// j is a neighbour of i iff A_c(i, j) > 1e-6 or j == i.
class Neighborhood {
 public:
  static Neighborhood from_adjacency(const Matrix& adjacency);

  std::size_t size() const noexcept { return k_; }
  bool contains(std::size_t i, std::size_t j) const noexcept { return mask_[i * k_ + j] != 0; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  std::vector<std::size_t> neighbors(std::size_t i) const;

 private:
  std::size_t k_ = 0;
  std::vector<std::uint8_t> mask_;
};

/// H = X_c * W_embed.
Var embed(Var xc, const GatVars& params);
/// Z = H * W_transform, the per-node attention-side features.
Var transform(Var h, const GatVars& params);
/// Dense k x k attention matrix; alpha(i, j) = 0 outside N_i.
Var attention(Var z, const GatVars& params, const Neighborhood& nbh);
/// H' = ELU(alpha * Z).
Var aggregate(Var alpha, Var z);
/// Mean over nodes, 1 x d'.
Var pool(Var h_prime);

struct LevelEncoding {
  Var alpha;
  Var node_features;
  Var embedding;
};
/// pool . aggregate . attention . embed on one coarsened graph.
LevelEncoding encode_level(Var xc, Var ac, const GatVars& params);

Matrix embed(const Matrix& xc, const GatParams& params);
Matrix attention_scores(const Matrix& h, const GatParams& params, const Neighborhood& nbh);
Matrix aggregate(const Matrix& h, const Matrix& alpha, const GatParams& params);
Matrix pool(const Matrix& h_prime);

}  // namespace msgaf::gat
