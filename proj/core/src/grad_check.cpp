#include "msgaf/grad_check.hpp"

#include <cmath>
#include <string>

namespace msgaf {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.constant(p));
  Matrix out;
  try {
    out = f(tape, vars).value();
  } catch (const std::domain_error&) {
    return std::nan("");
  }
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("grad_check: function must return 1x1");
  return out(0, 0);
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, std::span<const Matrix> at, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-4)) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-8, 1e-4], got " + std::to_string(eps));
  }
  std::vector<Matrix> params(at.begin(), at.end());

  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& p : params) vars.push_back(tape.variable(p));
  Var out = f(tape, vars);
  if (!std::isfinite(out.value()(0, 0))) throw GradCheckError("grad_check: f is non-finite at the base point", 0, 0);
  tape.backward(out);
  std::vector<Matrix> analytic;
  for (const Var& v : vars) analytic.push_back(v.grad());

  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t e = 0; e < params[t].size(); ++e) {
      double& x = params[t].data()[e];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate(f, params);
      x = saved - eps;
      const double down = evaluate(f, params);
      x = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw GradCheckError("grad_check: f is non-finite when probing tensor " + std::to_string(t) + " entry " +
                                 std::to_string(e),
                             t, e);
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t].data()[e];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.probes;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = t;
        result.worst_entry = e;
      }
    }
  }
  return result;
}

}  // namespace msgaf
