#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "vsplit/core/tensor.hpp"

namespace vsplit {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

/// Owns parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, Tensor init);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); the stream is keyed on
  /// (seed, name) so creation order never changes the values.
  Parameter& glorot(const std::string& name, Shape shape, std::uint64_t seed);
  Parameter& zeros(const std::string& name, Shape shape);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t element_count() const;
  std::size_t size() const { return params_.size(); }
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = static_cast<std::size_t>(-1);
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
  friend bool operator==(Var, Var) = default;
};

class Tape;

/// Receives the gradient and forward value of the node it belongs to and
/// pushes contributions into its inputs through Tape::grad_buffer.
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

/// Append-only record of primitive applications for reverse-mode
/// differentiation. One writer per tape.
class Tape {
 public:
  Var constant(Tensor value);
  /// Leaf that collects a gradient but is not a parameter (cut-layer inputs).
  Var input(Tensor value);
  /// Leaf bound to a parameter; gradients are added into Parameter::grad by
  /// backward(). Registering the same parameter twice returns the same Var.
  Var param(Parameter& p);

  Var record(Tensor value, std::vector<Var> inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return node(v).value; }
  /// Gradient accumulated at v during the last backward pass (empty if none).
  const Tensor& grad(Var v) const { return node(v).grad; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool any_requires_grad(const std::vector<Var>& vs) const;

  /// Zero-initialised gradient storage for v, allocated on first use.
  Tensor& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1; loss must hold exactly one element.
  void backward(Var loss);
  /// Seeds an arbitrary upstream gradient, e.g. one received across a cut.
  void backward(Var output, const Tensor& seed);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(Node n);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Var> param_vars_;
};

}  // namespace vsplit
