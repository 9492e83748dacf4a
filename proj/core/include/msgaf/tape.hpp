#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "msgaf/matrix.hpp"

namespace msgaf {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Operation record for reverse-mode differentiation. Nodes are stored in
/// creation order, which is a topological order; backward() walks it once in
/// reverse. A tape is not thread-safe; use one per thread.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Appends an operation node. `backward` is dropped when no input requires
  /// a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(output)/d(output) = 1 and propagates to every node. The output
  /// must be 1x1. Gradients from a previous call are discarded.
  void backward(Var output);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() target w.r.t. node `id`; a zero matrix
  /// if the node was not reached.
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Accumulator for node `id`, zero-initialised on first access.
  Matrix& grad_accumulator(std::size_t id);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  Var push(Node node);

  std::deque<Node> nodes_;
  mutable std::deque<Matrix> zero_grads_;
};

/// Differentiable primitives. All inputs of one call must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Adds a 1xc row to every row of an rxc matrix.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var leaky_relu(Var a, double negative_slope = 0.2);
Var elu(Var a);
Var exp(Var a);
/// Natural log; input entries must be positive.
Var log(Var a);
Var row_softmax(Var a);
/// Row softmax restricted to entries with mask != 0; masked entries are 0 in
/// the output. Every row must keep at least one entry.
Var masked_row_softmax(Var a, std::span<const std::uint8_t> mask);
/// Column means, 1xc.
Var mean_rows(Var a);
/// Sum of all entries, 1x1.
Var sum(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);

}  // namespace ad

}  // namespace msgaf
