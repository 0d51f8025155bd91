#include "vsplit/core/gradcheck.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "vsplit/core/errors.hpp"

namespace vsplit {

namespace {

double evaluate(const ForwardFn& forward) {
  Tape tape;
  return tape.value(forward(tape)).item();
}

GradCheckResult compare_central(const std::function<double()>& loss, std::span<Parameter* const> params, double eps) {
  std::vector<Tensor> analytic_grads;
  for (Parameter* p : params) analytic_grads.push_back(p->grad);
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter* p = params[k];
    auto values = p->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double up = loss();
      values[i] = original - eps;
      const double down = loss();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = analytic_grads[k][i];
      const double err = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace

GradCheckResult finite_diff_check(const ForwardFn& forward, std::span<Parameter* const> params, double eps) {
  const double first = evaluate(forward);
  const double second = evaluate(forward);
  if (std::memcmp(&first, &second, sizeof(double)) != 0)
    throw ContractError("finite_diff_check: forward function is not deterministic");

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = forward(tape);
    tape.backward(loss);
  }
  return compare_central([&] { return evaluate(forward); }, params, eps);
}

GradCheckResult finite_diff_check(const std::function<double()>& loss_and_grad, std::span<Parameter* const> params,
                                  double eps) {
  const double first = loss_and_grad();
  const double again = loss_and_grad();
  if (std::memcmp(&first, &again, sizeof(double)) != 0)
    throw ContractError("finite_diff_check: loss function is not deterministic");
  return compare_central(loss_and_grad, params, eps);
}

}  // namespace vsplit
