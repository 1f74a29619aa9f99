#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "compgen/grad/params.hpp"
#include "compgen/grad/tape.hpp"

namespace compgen::grad {

/// Builds a scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&, ParamSet&)>;

struct GradCheckOptions {
  double eps = 1e-5;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Central differences against backward(). Per-coordinate error is
/// |a - n| / max(1e-8, |a| + |n|). Parameter values are restored on return.
GradCheckReport grad_check_report(const LossBuilder& loss, ParamSet& params, const GradCheckOptions& options = {});

inline double grad_check(const LossBuilder& loss, ParamSet& params, double eps = 1e-5) {
  return grad_check_report(loss, params, GradCheckOptions{eps}).max_relative_error;
}

}  // namespace compgen::grad
