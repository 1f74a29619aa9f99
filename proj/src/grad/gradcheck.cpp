#include "compgen/grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace compgen::grad {

namespace {

double evaluate(const LossBuilder& loss, ParamSet& params) {
  Tape tape;
  return loss(tape, params).value().item();
}

}  // namespace

GradCheckReport grad_check_report(const LossBuilder& loss, ParamSet& params, const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("grad_check: eps must be positive");
  params.zero_grad();
  {
    Tape tape;
    Var out = loss(tape, params);
    tape.backward(out);
  }
  GradCheckReport report;
  for (auto& p : params.entries()) {
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + options.eps;
      const double plus = evaluate(loss, params);
      p.value[i] = saved - options.eps;
      const double minus = evaluate(loss, params);
      p.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double analytic = p.grad[i];
      const double err = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++report.coordinates_checked;
      if (report.worst_parameter.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace compgen::grad
