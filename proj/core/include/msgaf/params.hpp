#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msgaf/matrix.hpp"
#include "msgaf/tape.hpp"

namespace msgaf {

struct NamedTensor {
  std::string name;
  Matrix value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Ordered collection of named learnable tensors. Order is insertion order
/// and is stable across save/load.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t scalar_count() const noexcept;
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Matrix& operator[](std::size_t i) { return tensors_[i].value; }
  const Matrix& operator[](std::size_t i) const { return tensors_[i].value; }
  Matrix& at(std::string_view name) { return tensors_[index_of(name)].value; }
  const Matrix& at(std::string_view name) const { return tensors_[index_of(name)].value; }
  const std::string& name(std::size_t i) const { return tensors_[i].name; }

  const std::vector<NamedTensor>& tensors() const noexcept { return tensors_; }

  /// Creates one gradient-tracking leaf per tensor, in order.
  std::vector<Var> bind(Tape& tape) const;
  /// Creates constant (non-differentiable) leaves, in order.
  std::vector<Var> bind_constant(Tape& tape) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace msgaf
