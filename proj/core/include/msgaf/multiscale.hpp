#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf::multiscale {

/// One branch of the hierarchy. A divisor of 1 is the micro level, which
/// keeps node identity and bypasses learnable assignment.
struct LevelSpec {
  std::string name;
  std::size_t divisor = 1;

  bool is_micro() const noexcept { return divisor == 1; }
  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Level schedules for 1..4 branches:
/// {n}, {n, n/4}, {n, n/4, n/8}, {n, n/2, n/4, n/8}.
std::vector<LevelSpec> level_schedule(std::size_t levels);

/// Node count of a level: n for micro, otherwise max(1, floor(n / divisor)).
std::size_t level_size(std::size_t n, const LevelSpec& level);

/// Assignment parameters: weight is (d+2) x k, bias is 1 x k.
struct CoarsenParams {
  Matrix weight;
  Matrix bias;
};

struct CoarsenVars {
  Var weight;
  Var bias;
};

struct ScaleBundle {
  std::string level;
  std::size_t k = 0;
  Matrix assignment;  // n x k
  Matrix features;    // k x (d+2)
  Matrix adjacency;   // k x k
};

struct ScaleVars {
  std::string level;
  std::size_t k = 0;
  Var assignment;
  Var features;
  Var adjacency;
};

/// P = row_softmax(X * W_p + 1 * b_p).
Var assignment(Var x, const CoarsenVars& params);
Matrix assignment(const Matrix& x, const CoarsenParams& params);

struct Coarsened {
  Var features;   // P^T X
  Var adjacency;  // P^T A P
};
Coarsened coarsen(Var x, Var a, Var p);

struct CoarsenedMatrices {
  Matrix features;
  Matrix adjacency;
};
CoarsenedMatrices coarsen(const Matrix& x, const Matrix& a, const Matrix& p);

/// Builds one level from the original graph. `params` must be present for
/// every non-micro level.
ScaleVars build_level(Var x, Var a, const LevelSpec& level, const CoarsenVars* params);

/// Builds every level of `schedule` independently from the original (x, a).
/// `params[i]` is ignored for micro levels.
std::vector<ScaleBundle> build_levels(const Matrix& x, const Matrix& a, std::span<const LevelSpec> schedule,
                                      std::span<const std::optional<CoarsenParams>> params);

}  // namespace msgaf::multiscale
