#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

struct GradCheckItem {
  std::string param;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::vector<GradCheckItem> failures;  // elements exceeding the tolerance
  bool ok(double tol) const { return max_rel_err < tol; }
};

// Compares the analytic gradient of `loss_fn` (which must rebuild its graph
// on every call) against central finite differences with the given step, for
// every element of every parameter. The relative error denominator is floored
// at 1e-6 to keep finite-difference roundoff on near-zero gradients from
// registering as error.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::span<const NamedParam> params, double step = 1e-5,
                           double tolerance = 1e-4);

}  // namespace amtpp
