#include "msgaf/scene.hpp"

#include <stdexcept>
#include <string>

namespace msgaf::scene {

Var recognize(Var f, const SceneVars& params) {
  if (!params.has_gate) throw std::logic_error("recognize: model has no scene recognizer");
  Var hidden = ad::relu(ad::add_row(ad::matmul(f, params.w_s1), params.b_s1));
  return ad::add_row(ad::matmul(hidden, params.w_s2), params.b_s2);
}

Var gate(Var s, const SceneVars& params) {
  if (!params.has_gate) throw std::logic_error("gate: model has no gate");
  return ad::row_softmax(ad::add_row(ad::matmul(s, params.w_gate), params.b_gate));
}

Var expert(std::size_t i, Var x, const SceneVars& params) {
  if (i >= params.experts.size()) {
    throw std::out_of_range("expert index " + std::to_string(i) + " out of range for " +
                            std::to_string(params.experts.size()) + " experts");
  }
  const ExpertVars& e = params.experts[i];
  Var hidden = ad::relu(ad::add_row(ad::matmul(x, e.w1), e.b1));
  return ad::relu(ad::add_row(ad::matmul(hidden, e.w2), e.b2));
}

EstimateVars estimate(Var f, const SceneVars& params) {
  EstimateVars out;
  std::vector<Var> outputs;
  outputs.reserve(params.experts.size());
  for (std::size_t i = 0; i < params.experts.size(); ++i) outputs.push_back(expert(i, f, params));
  out.expert_outputs = ad::concat_cols(outputs);
  if (params.has_gate) {
    out.scene = recognize(f, params);
    out.omega = gate(out.scene, params);
  } else {
    if (params.experts.size() != 1) throw std::logic_error("estimate: gate-free model must have exactly one expert");
    out.omega = f.tape()->constant(Matrix(1, 1, 1.0));
  }
  out.latency = ad::sum(ad::mul(out.omega, out.expert_outputs));
  return out;
}

namespace {

struct Bound {
  Tape tape;
  SceneVars vars;
  explicit Bound(const SceneParams& p) {
    vars.has_gate = !p.w_gate.empty();
    if (vars.has_gate) {
      vars.w_s1 = tape.constant(p.w_s1);
      vars.b_s1 = tape.constant(p.b_s1);
      vars.w_s2 = tape.constant(p.w_s2);
      vars.b_s2 = tape.constant(p.b_s2);
      vars.w_gate = tape.constant(p.w_gate);
      vars.b_gate = tape.constant(p.b_gate);
    }
    for (const ExpertParams& e : p.experts) {
      vars.experts.push_back({tape.constant(e.w1), tape.constant(e.b1), tape.constant(e.w2), tape.constant(e.b2)});
    }
  }
};

}  // namespace

Matrix recognize(const Matrix& f, const SceneParams& params) {
  Bound b(params);
  return recognize(b.tape.constant(f), b.vars).value();
}

Matrix gate(const Matrix& s, const SceneParams& params) {
  Bound b(params);
  return gate(b.tape.constant(s), b.vars).value();
}

double expert(std::size_t i, const Matrix& x, const SceneParams& params) {
  Bound b(params);
  return expert(i, b.tape.constant(x), b.vars).value()(0, 0);
}

SceneOutput estimate(const Matrix& f, const SceneParams& params) {
  Bound b(params);
  EstimateVars e = estimate(b.tape.constant(f), b.vars);
  SceneOutput out;
  if (e.scene.valid()) out.scene = e.scene.value();
  out.omega = e.omega.value();
  out.expert_outputs = e.expert_outputs.value();
  out.latency = e.latency.value()(0, 0);
  return out;
}

}  // namespace msgaf::scene
