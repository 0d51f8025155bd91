#include "vsplit/core/autograd.hpp"

#include <cmath>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

Parameter& ParameterStore::add(const std::string& name, Tensor init) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->zero_grad();
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  index_.emplace(name, raw);
  return *raw;
}

Parameter& ParameterStore::glorot(const std::string& name, Shape shape, std::uint64_t seed) {
  std::size_t fan_in = 1;
  std::size_t fan_out = 1;
  if (shape.size() == 1) {
    fan_in = shape[0];
  } else if (shape.size() >= 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(derive_seed(seed, {hash_string(name)}));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return add(name, std::move(t));
}

Parameter& ParameterStore::zeros(const std::string& name, Shape shape) { return add(name, Tensor(std::move(shape))); }

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_vars_.find(&p); it != param_vars_.end()) return it->second;
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  Var v = push(std::move(n));
  param_vars_.emplace(&p, v);
  return v;
}

bool Tape::any_requires_grad(const std::vector<Var>& vs) const {
  for (auto v : vs)
    if (node(v).requires_grad) return true;
  return false;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  for (auto in : inputs)
    if (in.id >= nodes_.size()) throw ContractError("op input recorded after its consumer");
  Node n;
  n.value = std::move(value);
  n.requires_grad = any_requires_grad(inputs);
  if (n.requires_grad) n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (node(loss).value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(node(loss).value.shape()));
  }
  Tensor seed(node(loss).value.shape(), 1.0);
  backward(loss, seed);
}

void Tape::backward(Var output, const Tensor& seed) {
  require_same_shape(node(output).value, seed, "backward seed");
  for (auto& n : nodes_) n.grad = Tensor();
  if (!node(output).requires_grad) return;
  grad_buffer(output) = seed;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      // The node's grad is complete once every consumer (all later nodes) ran.
      Tensor g = std::move(n.grad);
      n.backward(*this, g, n.value);
      n.grad = std::move(g);
    }
    if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      if (dst.size() != n.grad.size()) n.param->zero_grad(), dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace vsplit
