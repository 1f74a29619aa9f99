#include "compgen/grad/params.hpp"

#include <stdexcept>

namespace compgen::grad {

Parameter& ParamSet::add(const std::string& name, Tensor init) {
  if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
  init.require_finite(name.c_str());
  Tensor grad(init.shape(), 0.0);
  index_[name] = entries_.size();
  entries_.push_back(Parameter{name, std::move(init), std::move(grad)});
  return entries_.back();
}

Parameter& ParamSet::add_uniform(const std::string& name, Shape shape, Rng& rng, double scale) {
  Tensor init(std::move(shape));
  for (double& v : init.data()) v = rng.uniform(-scale, scale);
  return add(name, std::move(init));
}

Parameter& ParamSet::operator[](const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second];
}

const Parameter& ParamSet::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second];
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : entries_) p.grad.fill(0.0);
}

bool ParamSet::grads_finite() const {
  for (const auto& p : entries_) {
    if (!p.grad.all_finite()) return false;
  }
  return true;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size() || a.step_ != b.step_) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].name != b.entries_[i].name || a.entries_[i].value != b.entries_[i].value) return false;
  }
  return true;
}

}  // namespace compgen::grad
