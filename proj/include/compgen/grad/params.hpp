#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "compgen/grad/rng.hpp"
#include "compgen/grad/tensor.hpp"

namespace compgen::grad {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Named, insertion-ordered collection of trainable tensors. Every parameter
/// carries a gradient slot of identical shape.
class ParamSet {
 public:
  /// Adds a parameter; duplicate names are rejected.
  Parameter& add(const std::string& name, Tensor init);
  /// Adds a parameter drawn from uniform(-scale, scale).
  Parameter& add_uniform(const std::string& name, Shape shape, Rng& rng, double scale = 0.1);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Parameter& operator[](const std::string& name);
  const Parameter& operator[](const std::string& name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  bool grads_finite() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }
  void increment_step() { ++step_; }

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Parameter> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

}  // namespace compgen::grad
