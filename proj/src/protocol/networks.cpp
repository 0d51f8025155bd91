#include "vsplit/protocol/networks.hpp"

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

Cut parse_cut(const std::string& s) {
  if (s == "hidden") return Cut::Hidden;
  if (s == "logits") return Cut::Logits;
  throw ConfigError("unknown cut '" + s + "' (expected hidden or logits)");
}

std::string to_string(Cut c) { return c == Cut::Hidden ? "hidden" : "logits"; }

ServerNet::ServerNet(const HeadConfig& config, ParameterStore& store, std::uint64_t seed) : config_(config) {
  const std::size_t d = config.hidden;
  const std::size_t out = config.cut == Cut::Hidden ? d : config.classes;
  params_.push_back(&store.glorot("server/l0/W", Shape{config.input_dim, d}, seed));
  params_.push_back(&store.zeros("server/l0/b", Shape{d}));
  params_.push_back(&store.glorot("server/l1/W", Shape{d, out}, seed));
  params_.push_back(&store.zeros("server/l1/b", Shape{out}));
}

std::size_t ServerNet::output_dim() const noexcept {
  return config_.cut == Cut::Hidden ? config_.hidden : config_.classes;
}

Var ServerNet::forward(Tape& t, Var input, bool training, std::uint64_t dropout_key) const {
  if (t.value(input).cols() != config_.input_dim)
    throw ProtocolError("server input has " + std::to_string(t.value(input).cols()) + " columns, expected " +
                        std::to_string(config_.input_dim));
  Var x = ops::elu(t, ops::linear(t, input, t.param(*params_[0]), t.param(*params_[1])));
  x = ops::dropout(t, x, config_.dropout, derive_seed(dropout_key, {0}), training);
  x = ops::linear(t, x, t.param(*params_[2]), t.param(*params_[3]));
  if (config_.cut == Cut::Logits) return x;
  return ops::dropout(t, ops::elu(t, x), config_.dropout, derive_seed(dropout_key, {1}), training);
}

OutputLayer::OutputLayer(const HeadConfig& config, ParameterStore& store, std::uint64_t seed) {
  if (config.cut == Cut::Logits) return;
  params_.push_back(&store.glorot("label/out/W", Shape{config.hidden, config.classes}, seed));
  params_.push_back(&store.zeros("label/out/b", Shape{config.classes}));
}

Var OutputLayer::forward(Tape& t, Var hidden) const {
  if (params_.empty()) return hidden;
  return ops::linear(t, hidden, t.param(*params_[0]), t.param(*params_[1]));
}

double micro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> labels, std::size_t classes) {
  if (labels.empty()) throw DomainError("micro-F1 of an empty split");
  if (predicted.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] >= classes || labels[i] >= classes) throw DomainError("class index out of range");
    if (predicted[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[labels[i]];
    }
  }
  double TP = 0, FP = 0, FN = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    TP += static_cast<double>(tp[c]);
    FP += static_cast<double>(fp[c]);
    FN += static_cast<double>(fn[c]);
  }
  return 2 * TP / (2 * TP + FP + FN);
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = best;
  }
  return out;
}

}  // namespace vsplit
