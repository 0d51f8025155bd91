#pragma once

#include <functional>
#include <span>
#include <string>

#include "vsplit/core/autograd.hpp"

namespace vsplit {

/// Builds a fresh tape from the current parameter values and returns the
/// scalar loss node. Must be pure: same parameter values, same loss bits.
using ForwardFn = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares tape gradients with central differences (f(p+eps)-f(p-eps))/2eps
/// element by element. Error per element is |analytic - numeric| /
/// (|analytic| + 1e-8). Parameter values are restored on return.
GradCheckResult finite_diff_check(const ForwardFn& forward, std::span<Parameter* const> params, double eps = 1e-5);

/// Same check for a model spread over several tapes: `loss_and_grad`
/// returns the loss and leaves d loss / d p in every Parameter::grad.
GradCheckResult finite_diff_check(const std::function<double()>& loss_and_grad, std::span<Parameter* const> params,
                                  double eps = 1e-5);

}  // namespace vsplit
