#include "msgaf/gat.hpp"

#include <array>

namespace msgaf::gat {

Neighborhood Neighborhood::from_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeError("neighborhood needs a square matrix, got " + shape_str(adjacency));
  Neighborhood nbh;
  nbh.k_ = adjacency.rows();
  nbh.mask_.assign(nbh.k_ * nbh.k_, 0);
  for (std::size_t i = 0; i < nbh.k_; ++i)
    for (std::size_t j = 0; j < nbh.k_; ++j)
      nbh.mask_[i * nbh.k_ + j] = (i == j || adjacency(i, j) > kNeighborThreshold) ? 1 : 0;
  return nbh;
}

std::vector<std::size_t> Neighborhood::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k_; ++j)
    if (contains(i, j)) out.push_back(j);
  return out;
}

Var embed(Var xc, const GatVars& params) {
  if (xc.cols() != params.embed.rows()) {
    throw ShapeError("embed: X_c " + shape_str(xc.value()) + " does not match W_embed " +
                     shape_str(params.embed.value()));
  }
  return ad::matmul(xc, params.embed);
}

Var transform(Var h, const GatVars& params) { return ad::matmul(h, params.transform); }

Var attention(Var z, const GatVars& params, const Neighborhood& nbh) {
  const std::size_t k = z.rows();
  const std::size_t d = z.cols();
  if (nbh.size() != k) throw ShapeError("attention: neighborhood size does not match node count");
  if (params.attention.rows() != 2 * d || params.attention.cols() != 1) {
    throw ShapeError("attention: vector a must be " + std::to_string(2 * d) + "x1, got " +
                     shape_str(params.attention.value()));
  }
  // a^T [z_i ; z_j] = (Z a_src)_i + (Z a_dst)_j
  Var src = ad::matmul(z, ad::slice_rows(params.attention, 0, d));
  Var dst = ad::matmul(z, ad::slice_rows(params.attention, d, d));
  Tape& tape = *z.tape();
  Var ones_row = tape.constant(Matrix(1, k, 1.0));
  Var ones_col = tape.constant(Matrix(k, 1, 1.0));
  Var scores = ad::add(ad::matmul(src, ones_row), ad::matmul(ones_col, ad::transpose(dst)));
  return ad::masked_row_softmax(ad::leaky_relu(scores, kLeakySlope), nbh.mask());
}

Var aggregate(Var alpha, Var z) { return ad::elu(ad::matmul(alpha, z)); }

Var pool(Var h_prime) { return ad::mean_rows(h_prime); }

LevelEncoding encode_level(Var xc, Var ac, const GatVars& params) {
  const Neighborhood nbh = Neighborhood::from_adjacency(ac.value());
  Var z = transform(embed(xc, params), params);
  LevelEncoding out;
  out.alpha = attention(z, params, nbh);
  out.node_features = aggregate(out.alpha, z);
  out.embedding = pool(out.node_features);
  return out;
}

namespace {

struct Bound {
  Tape tape;
  GatVars vars;
  explicit Bound(const GatParams& p)
      : vars{tape.constant(p.embed), tape.constant(p.transform), tape.constant(p.attention)} {}
};

}  // namespace

Matrix embed(const Matrix& xc, const GatParams& params) {
  Bound b(params);
  return embed(b.tape.constant(xc), b.vars).value();
}

Matrix attention_scores(const Matrix& h, const GatParams& params, const Neighborhood& nbh) {
  Bound b(params);
  return attention(transform(b.tape.constant(h), b.vars), b.vars, nbh).value();
}

Matrix aggregate(const Matrix& h, const Matrix& alpha, const GatParams& params) {
  Bound b(params);
  return aggregate(b.tape.constant(alpha), transform(b.tape.constant(h), b.vars)).value();
}

Matrix pool(const Matrix& h_prime) {
  Tape tape;
  return pool(tape.constant(h_prime)).value();
}

}  // namespace msgaf::gat
