#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vsplit/core/autograd.hpp"

namespace vsplit {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain step p <- p - lr * g. Throws NumericError on a non-finite gradient
/// before touching any parameter.
void optimizer_step(std::span<Parameter* const> params, double learning_rate);

/// Stateful optimizer over a fixed parameter list. Adam keeps per-parameter
/// moments keyed by name.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);
  const OptimizerConfig& config() const noexcept { return config_; }
  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimizerConfig config_;
  std::unordered_map<std::string, Moments> moments_;
  std::size_t steps_ = 0;
};

}  // namespace vsplit
