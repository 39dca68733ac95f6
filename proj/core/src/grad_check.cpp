#include "amtpp/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace amtpp {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const NamedParam> params, double step,
                           double tolerance) {
  for (const auto& p : params) const_cast<Tensor&>(p.tensor).zero_grad();
  Tensor loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto w = const_cast<Tensor&>(params[pi].tensor).values_mut();
    for (std::size_t j = 0; j < w.size(); ++j) {
      double saved = w[j];
      double f_plus, f_minus;
      {
        NoGradGuard ng;
        w[j] = saved + step;
        f_plus = loss_fn().value();
        w[j] = saved - step;
        f_minus = loss_fn().value();
      }
      w[j] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * step);
      double a = analytic[pi][j];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      double rel = std::fabs(a - numeric) / denom;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.checked;
      if (rel >= tolerance)
        report.failures.push_back({params[pi].name, j, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace amtpp
