#pragma once

#include <map>
#include <string>

#include "compgen/grad/params.hpp"

namespace compgen::grad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter name;
/// the step count lives in the ParamSet so that it travels with checkpoints.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the gradients currently stored in `params`.
  /// Throws NumericalError (and leaves params untouched) on a non-finite gradient.
  void step(ParamSet& params);

  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    Tensor first;
    Tensor second;
  };

  AdamConfig config_;
  std::map<std::string, Moments> moments_;
};

/// One-shot form of Adam::step for callers that hold the optimizer state themselves.
void adam_step(ParamSet& params, Adam& state);

}  // namespace compgen::grad
