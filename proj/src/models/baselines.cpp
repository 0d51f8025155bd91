#include "vsplit/models/baselines.hpp"

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"

namespace vsplit {

MergedEntries merged_entries(const Subgraph& sg, std::size_t n_out, bool self_loops) {
  MergedEntries m;
  for (const auto& ch : sg.channels) {
    if (ch.metapath) continue;
    const std::size_t E = ch.entries_for(n_out);
    m.target.insert(m.target.end(), ch.target.begin(), ch.target.begin() + static_cast<std::ptrdiff_t>(E));
    m.neighbor.insert(m.neighbor.end(), ch.neighbor.begin(), ch.neighbor.begin() + static_cast<std::ptrdiff_t>(E));
  }
  if (self_loops)
    for (std::size_t i = 0; i < n_out; ++i) {
      m.target.push_back(i);
      m.neighbor.push_back(i);
    }
  return m;
}

namespace {

void check_subgraph(const Subgraph& sg, const HetGraph& graph, std::size_t layers, std::size_t feature_dim) {
  if (sg.hops() != layers)
    throw ContractError("subgraph has " + std::to_string(sg.hops()) + " hops but the encoder has " +
                        std::to_string(layers) + " layers");
  if (graph.feature_dim() != feature_dim) throw DimensionError("feature width differs from the schema");
}

}  // namespace

GcnEncoder::GcnEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store,
                       const std::string& prefix, std::uint64_t seed)
    : Encoder(config, schema, prefix) {
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string lp = "l" + std::to_string(l) + "/";
    w_.push_back(&make_weight(store, lp + "W", Shape{input_dim(l), config_.hidden}, seed));
    b_.push_back(&make_bias(store, lp + "b", config_.hidden));
  }
}

Var GcnEncoder::forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) {
  const std::size_t K = config_.layers;
  check_subgraph(sg, graph, K, schema_.feature_dim);
  Var x = t.constant(gather_features(sg, graph));
  for (std::size_t l = 0; l < K; ++l) {
    const std::size_t n_out = sg.level_size[K - 1 - l];
    auto m = merged_entries(sg, n_out, config_.gcn_include_self);
    std::vector<double> degree(n_out, 0.0);
    for (std::size_t tg : m.target) degree[tg] += 1.0;
    Tensor weight(Shape{m.target.size()});
    for (std::size_t k = 0; k < m.target.size(); ++k) weight[k] = 1.0 / degree[m.target[k]];
    Var agg = ops::segment_sum(t, ops::scale_rows(t, ops::gather_rows(t, x, m.neighbor), t.constant(std::move(weight))),
                               m.target, n_out);
    x = ops::elu(t, ops::linear(t, agg, t.param(*w_[l]), t.param(*b_[l])));
    x = layer_dropout(t, x, l, training, dropout_key);
  }
  return x;
}

GatEncoder::GatEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store,
                       const std::string& prefix, std::uint64_t seed)
    : Encoder(config, schema, prefix) {
  const std::size_t d = config_.hidden;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string lp = "l" + std::to_string(l) + "/";
    std::vector<Head> heads;
    for (std::size_t m = 0; m < config_.heads; ++m) {
      const std::string hp = lp + "h" + std::to_string(m) + "/";
      Head h;
      h.w = &make_weight(store, hp + "W", Shape{input_dim(l), d}, seed);
      h.a_src = &make_weight(store, hp + "a_src", Shape{d}, seed);
      h.a_dst = &make_weight(store, hp + "a_dst", Shape{d}, seed);
      heads.push_back(h);
    }
    heads_.push_back(std::move(heads));
    b_.push_back(&make_bias(store, lp + "b", d));
  }
}

Var GatEncoder::forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) {
  const std::size_t K = config_.layers;
  check_subgraph(sg, graph, K, schema_.feature_dim);
  alpha_.clear();
  Var x = t.constant(gather_features(sg, graph));
  for (std::size_t l = 0; l < K; ++l) {
    const std::size_t n_out = sg.level_size[K - 1 - l];
    auto m = merged_entries(sg, n_out, true);
    std::vector<Var> outs;
    for (const auto& head : heads_[l]) {
      Var h = ops::matmul(t, x, t.param(*head.w));
      Var s_src = ops::matvec(t, h, t.param(*head.a_src));
      Var s_dst = ops::matvec(t, ops::slice_rows(t, h, 0, n_out), t.param(*head.a_dst));
      Var e = ops::leaky_relu(
          t, ops::add(t, ops::gather_rows(t, s_dst, m.target), ops::gather_rows(t, s_src, m.neighbor)), 0.2);
      Var alpha = ops::segment_softmax(t, e, m.target, n_out);
      alpha_.push_back(alpha);
      outs.push_back(ops::segment_sum(t, ops::scale_rows(t, ops::gather_rows(t, h, m.neighbor), alpha), m.target, n_out));
    }
    Var mean = ops::scale(t, outs.size() == 1 ? outs[0] : ops::sum_of(t, outs), 1.0 / static_cast<double>(outs.size()));
    x = ops::elu(t, ops::add_rowvec(t, mean, t.param(*b_[l])));
    x = layer_dropout(t, x, l, training, dropout_key);
  }
  return x;
}

}  // namespace vsplit
