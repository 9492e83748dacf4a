#include "msgaf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msgaf {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) throw std::logic_error("tape op mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (!n.grad.empty()) return n.grad;
  zero_grads_.emplace_back(n.value.rows(), n.value.cols());
  return zero_grads_.back();
}

Matrix& Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var output) {
  if (output.tape() != this) throw std::logic_error("backward: variable belongs to another tape");
  const Matrix& out = nodes_[output.id()].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("backward: output must be 1x1, got " + shape_str(out));
  }
  for (Node& n : nodes_) n.grad = Matrix();
  zero_grads_.clear();
  grad_accumulator(output.id())(0, 0) = 1.0;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

namespace ad {

namespace {

void accumulate(Matrix& dst, const Matrix& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// dst += g * b^T
void acc_matmul_nt(Matrix& dst, const Matrix& g, const Matrix& b) {
  const std::size_t n = g.rows(), m = g.cols(), k = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    auto grow = g.row(i);
    auto drow = dst.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t t = 0; t < m; ++t) s += grow[t] * brow[t];
      drow[j] += s;
    }
  }
}

// dst += a^T * g
void acc_matmul_tn(Matrix& dst, const Matrix& a, const Matrix& g) {
  const std::size_t n = a.rows(), k = a.cols(), m = g.cols();
  for (std::size_t r = 0; r < n; ++r) {
    auto arow = a.row(r);
    auto grow = g.row(r);
    for (std::size_t i = 0; i < k; ++i) {
      const double ai = arow[i];
      if (ai == 0.0) continue;
      auto drow = dst.row(i);
      for (std::size_t j = 0; j < m; ++j) drow[j] += ai * grow[j];
    }
  }
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::logic_error("operation on an unbound variable");
  return *a.tape();
}

// Elementwise unary op; `deriv(x, y)` gives dy/dx from input x and output y.
template <class F, class D>
Var unary(Var a, F f, D deriv) {
  Matrix out = a.value();
  for (double& v : out.data()) v = f(v);
  const std::size_t ia = a.id();
  return tape_of(a).record(std::move(out), {a}, [ia, deriv](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& dx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < x.size(); ++i) dx.data()[i] += g.data()[i] * deriv(x.data()[i], y.data()[i]);
  });
}

void softmax_backward(const Matrix& y, const Matrix& g, Matrix& dx) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto gr = g.row(r);
    auto dr = dx.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
    for (std::size_t j = 0; j < yr.size(); ++j) dr[j] += yr[j] * (gr[j] - dot);
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Matrix out = msgaf::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) acc_matmul_nt(t.grad_accumulator(ia), g, t.value(ib));
    if (t.requires_grad(ib)) acc_matmul_tn(t.grad_accumulator(ib), t.value(ia), g);
  });
}

Var transpose(Var a) {
  const std::size_t ia = a.id();
  return tape_of(a).record(msgaf::transpose(a.value()), {a}, [ia](Tape& t, std::size_t self) {
    accumulate(t.grad_accumulator(ia), msgaf::transpose(t.grad(self)));
  });
}

Var add(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record(msgaf::add(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad_accumulator(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad_accumulator(ib), g);
  });
}

Var sub(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record(msgaf::sub(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad_accumulator(ia), g);
    if (t.requires_grad(ib)) {
      Matrix& db = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) db.data()[i] -= g.data()[i];
    }
  });
}

Var mul(Var a, Var b) {
  const std::size_t ia = a.id(), ib = b.id();
  return tape_of(a).record(hadamard(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad_accumulator(ia), hadamard(g, t.value(ib)));
    if (t.requires_grad(ib)) accumulate(t.grad_accumulator(ib), hadamard(g, t.value(ia)));
  });
}

Var add_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape_str(rv) + " onto " + shape_str(av));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += rv(0, j);
  }
  const std::size_t ia = a.id(), ir = row.id();
  return tape_of(a).record(std::move(out), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad_accumulator(ia), g);
    if (t.requires_grad(ir)) {
      Matrix& dr = t.grad_accumulator(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) dr(0, j) += g(i, j);
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double negative_slope) {
  return unary(a, [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
               [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Var elu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var row_softmax(Var a) {
  const std::size_t ia = a.id();
  return tape_of(a).record(msgaf::row_softmax(a.value()), {a}, [ia](Tape& t, std::size_t self) {
    softmax_backward(t.value(self), t.grad(self), t.grad_accumulator(ia));
  });
}

Var masked_row_softmax(Var a, std::span<const std::uint8_t> mask) {
  const Matrix& x = a.value();
  if (mask.size() != x.size()) throw ShapeError("masked_row_softmax: mask size does not match " + shape_str(x));
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto o = out.row(i);
    const std::uint8_t* m = mask.data() + i * x.cols();
    double mx = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (m[j] && (!any || in[j] > mx)) {
        mx = in[j];
        any = true;
      }
    }
    if (!any) throw std::invalid_argument("masked_row_softmax: row " + std::to_string(i) + " is fully masked");
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = m[j] ? std::exp(in[j] - mx) : 0.0;
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  const std::size_t ia = a.id();
  return tape_of(a).record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    softmax_backward(t.value(self), t.grad(self), t.grad_accumulator(ia));
  });
}

Var mean_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : out.data()) v *= inv;
  const std::size_t ia = a.id();
  return tape_of(a).record(std::move(out), {a}, [ia, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& dx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < dx.rows(); ++i)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(i, j) += g(0, j) * inv;
  });
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  return tape_of(a).record(Matrix(1, 1, msgaf::sum(a.value())), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad_accumulator(ia).data()) v += g;
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch " + shape_str(p.value()));
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
    ids.push_back(p.id());
  }
  return tape_of(parts.front()).record(Matrix(rows, cols, std::move(data)), parts,
                                       [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t n = t.value(id).size();
      if (t.requires_grad(id)) {
        Matrix& d = t.grad_accumulator(id);
        for (std::size_t i = 0; i < n; ++i) d.data()[i] += g.data()[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch " + shape_str(p.value()));
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
    ids.push_back(p.id());
  }
  return tape_of(parts.front()).record(std::move(out), parts, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const std::size_t c = t.value(id).cols();
      if (t.requires_grad(id)) {
        Matrix& d = t.grad_accumulator(id);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) d(i, j) += g(i, off + j);
      }
      off += c;
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (count == 0 || begin + count > x.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(x));
  }
  auto d = x.data().subspan(begin * x.cols(), count * x.cols());
  const std::size_t ia = a.id();
  return tape_of(a).record(Matrix(count, x.cols(), std::vector<double>(d.begin(), d.end())), {a},
                           [ia, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& dx = t.grad_accumulator(ia);
    const std::size_t off = begin * dx.cols();
    for (std::size_t i = 0; i < g.size(); ++i) dx.data()[off + i] += g.data()[i];
  });
}

}  // namespace ad

}  // namespace msgaf
