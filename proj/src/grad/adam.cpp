#include "compgen/grad/adam.hpp"

#include <cmath>

namespace compgen::grad {

void Adam::step(ParamSet& params) {
  for (const auto& p : params.entries()) {
    if (!p.grad.all_finite()) {
      throw NumericalError("non-finite gradient for parameter '" + p.name + "' at step " +
                           std::to_string(params.step() + 1));
    }
  }
  params.increment_step();
  const double t = static_cast<double>(params.step());
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& p : params.entries()) {
    auto it = moments_.find(p.name);
    if (it == moments_.end()) {
      it = moments_.emplace(p.name, Moments{Tensor(p.value.shape(), 0.0), Tensor(p.value.shape(), 0.0)}).first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void adam_step(ParamSet& params, Adam& state) { state.step(params); }

}  // namespace compgen::grad
