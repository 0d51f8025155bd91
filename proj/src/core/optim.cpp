#include "vsplit/core/optim.hpp"

#include <cmath>

#include "vsplit/core/errors.hpp"

namespace vsplit {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

namespace {

void check_finite(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (p->grad.size() != p->value.size())
      throw DimensionError("gradient of " + p->name + " has shape " + shape_string(p->grad.shape()));
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
}

}  // namespace

void optimizer_step(std::span<Parameter* const> params, double learning_rate) {
  check_finite(params);
  for (Parameter* p : params) {
    auto v = p->value.values();
    auto g = p->grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
  }
}

void Optimizer::step(std::span<Parameter* const> params) {
  ++steps_;
  if (config_.kind == OptimizerKind::Sgd) {
    optimizer_step(params, config_.learning_rate);
    return;
  }
  check_finite(params);
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    auto& mom = moments_[p->name];
    if (mom.m.size() != p->value.size()) {
      mom.m.assign(p->value.size(), 0.0);
      mom.v.assign(p->value.size(), 0.0);
    }
    auto v = p->value.values();
    auto g = p->grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g[i];
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      v[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace vsplit
