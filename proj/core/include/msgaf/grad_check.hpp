#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf {

class GradCheckError : public std::runtime_error {
 public:
  GradCheckError(const std::string& what, std::size_t tensor, std::size_t entry)
      : std::runtime_error(what), tensor(tensor), entry(entry) {}
  std::size_t tensor;
  std::size_t entry;
};

/// Builds a scalar (1x1) on `tape` from leaves bound to the parameters.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_entry = 0;
  std::size_t probes = 0;
};

/// Compares the tape gradient of `f` at `at` with central differences of
/// step `eps` over every scalar parameter. Error per entry is
/// |analytic - numeric| / max(1, |analytic|).
GradCheckResult grad_check(const ScalarFn& f, std::span<const Matrix> at, double eps);

}  // namespace msgaf
