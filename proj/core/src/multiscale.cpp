#include "msgaf/multiscale.hpp"

#include <algorithm>
#include <stdexcept>

namespace msgaf::multiscale {

std::vector<LevelSpec> level_schedule(std::size_t levels) {
  switch (levels) {
    case 1: return {{"micro", 1}};
    case 2: return {{"micro", 1}, {"meso", 4}};
    case 3: return {{"micro", 1}, {"meso", 4}, {"macro", 8}};
    case 4: return {{"micro", 1}, {"meso_fine", 2}, {"meso", 4}, {"macro", 8}};
    default: throw std::invalid_argument("level schedule must have 1 to 4 levels, got " + std::to_string(levels));
  }
}

std::size_t level_size(std::size_t n, const LevelSpec& level) {
  if (level.is_micro()) return n;
  return std::max<std::size_t>(1, n / level.divisor);
}

Var assignment(Var x, const CoarsenVars& params) {
  if (x.cols() != params.weight.rows()) {
    throw ShapeError("assignment: features " + shape_str(x.value()) + " do not match W_p " +
                     shape_str(params.weight.value()));
  }
  return ad::row_softmax(ad::add_row(ad::matmul(x, params.weight), params.bias));
}

Matrix assignment(const Matrix& x, const CoarsenParams& params) {
  Tape tape;
  CoarsenVars vars{tape.constant(params.weight), tape.constant(params.bias)};
  return assignment(tape.constant(x), vars).value();
}

Coarsened coarsen(Var x, Var a, Var p) {
  const std::size_t n = p.rows();
  if (x.rows() != n || a.rows() != n || a.cols() != n) {
    throw ShapeError("coarsen: P " + shape_str(p.value()) + " incompatible with X " + shape_str(x.value()) +
                     " and A " + shape_str(a.value()));
  }
  Var pt = ad::transpose(p);
  return {ad::matmul(pt, x), ad::matmul(ad::matmul(pt, a), p)};
}

CoarsenedMatrices coarsen(const Matrix& x, const Matrix& a, const Matrix& p) {
  Tape tape;
  Coarsened c = coarsen(tape.constant(x), tape.constant(a), tape.constant(p));
  return {c.features.value(), c.adjacency.value()};
}

ScaleVars build_level(Var x, Var a, const LevelSpec& level, const CoarsenVars* params) {
  const std::size_t n = x.rows();
  ScaleVars out;
  out.level = level.name;
  out.k = level_size(n, level);
  if (level.is_micro()) {
    out.assignment = x.tape()->constant(Matrix::identity(n));
    out.features = x;
    out.adjacency = a;
    return out;
  }
  if (params == nullptr) throw std::invalid_argument("level '" + level.name + "' needs coarsening parameters");
  if (params->weight.cols() != out.k) {
    throw ShapeError("level '" + level.name + "' expects k=" + std::to_string(out.k) + ", W_p is " +
                     shape_str(params->weight.value()));
  }
  out.assignment = assignment(x, *params);
  Coarsened c = coarsen(x, a, out.assignment);
  out.features = c.features;
  out.adjacency = c.adjacency;
  return out;
}

std::vector<ScaleBundle> build_levels(const Matrix& x, const Matrix& a, std::span<const LevelSpec> schedule,
                                      std::span<const std::optional<CoarsenParams>> params) {
  if (params.size() != schedule.size()) throw std::invalid_argument("build_levels: one parameter slot per level");
  Tape tape;
  Var xv = tape.constant(x);
  Var av = tape.constant(a);
  std::vector<ScaleBundle> out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    std::optional<CoarsenVars> vars;
    if (!schedule[i].is_micro()) {
      if (!params[i]) throw std::invalid_argument("level '" + schedule[i].name + "' needs coarsening parameters");
      vars = CoarsenVars{tape.constant(params[i]->weight), tape.constant(params[i]->bias)};
    }
    ScaleVars s = build_level(xv, av, schedule[i], vars ? &*vars : nullptr);
    out.push_back({s.level, s.k, s.assignment.value(), s.features.value(), s.adjacency.value()});
  }
  return out;
}

}  // namespace msgaf::multiscale
