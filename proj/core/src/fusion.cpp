#include "msgaf/fusion.hpp"

#include <stdexcept>
#include <vector>

namespace msgaf::fusion {

FusedVars fuse(std::span<const Var> embeddings, const FusionVars* params) {
  if (embeddings.empty()) throw std::invalid_argument("fuse: no level embeddings");
  const std::size_t dim = embeddings.front().cols();
  for (const Var& h : embeddings) {
    if (h.rows() != 1 || h.cols() != dim) {
      throw ShapeError("fuse: level embeddings must share shape 1x" + std::to_string(dim) + ", got " +
                       shape_str(h.value()));
    }
  }
  Tape& tape = *embeddings.front().tape();
  Var stacked = ad::concat_rows(embeddings);  // L x d'
  const std::size_t levels = embeddings.size();
  FusedVars out;
  if (params == nullptr) {
    out.beta = tape.constant(Matrix(1, levels, 1.0 / static_cast<double>(levels)));
  } else {
    if (params->weight.rows() != 1 || params->weight.cols() != dim) {
      throw ShapeError("fuse: W_beta must be 1x" + std::to_string(dim) + ", got " + shape_str(params->weight.value()));
    }
    // One logit per level: (h_l . W_beta) + b_beta, laid out as a row.
    Var logits = ad::transpose(ad::matmul(stacked, ad::transpose(params->weight)));
    Var shifted = ad::add_row(logits, ad::matmul(params->bias, tape.constant(Matrix(1, levels, 1.0))));
    out.beta = ad::row_softmax(shifted);
  }
  out.fused = ad::matmul(out.beta, stacked);
  return out;
}

FusedState fuse(std::span<const Matrix> embeddings, const FusionParams& params) {
  Tape tape;
  std::vector<Var> hs;
  for (const Matrix& h : embeddings) hs.push_back(tape.constant(h));
  FusionVars vars{tape.constant(params.weight), tape.constant(params.bias)};
  FusedVars f = fuse(hs, &vars);
  return {f.beta.value(), f.fused.value()};
}

}  // namespace msgaf::fusion
