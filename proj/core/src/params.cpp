#include "msgaf/params.hpp"

#include <stdexcept>

namespace msgaf {

std::size_t ParamSet::add(std::string name, Matrix value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  tensors_.push_back({std::move(name), std::move(value)});
  return tensors_.size() - 1;
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range("unknown parameter: " + std::string(name));
}

std::vector<Var> ParamSet::bind(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(tensors_.size());
  for (const auto& t : tensors_) vars.push_back(tape.variable(t.value));
  return vars;
}

std::vector<Var> ParamSet::bind_constant(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(tensors_.size());
  for (const auto& t : tensors_) vars.push_back(tape.constant(t.value));
  return vars;
}

}  // namespace msgaf
