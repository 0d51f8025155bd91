#include "vsplit/models/hat.hpp"

#include <numeric>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"

namespace vsplit::hat {

Var transform_and_fuse(Tape& t, Var f, Var e, const FuseParams& p, FusionKind kind) {
  Var h = ops::linear(t, f, p.w_node, p.b_node);
  Var r = ops::linear(t, e, p.w_edge, p.b_edge);
  switch (kind) {
    case FusionKind::Concat: return ops::linear(t, ops::concat_cols(t, {h, r}), p.w_fuse, p.b_fuse);
    case FusionKind::Add: return ops::add(t, h, r);
    case FusionKind::Linear: return ops::linear(t, ops::add(t, h, r), p.w_fuse, p.b_fuse);
  }
  throw ContractError("unknown fusion kind");
}

Var fuse_entries(Tape& t, Var h, const std::vector<std::size_t>& neighbor, Var edge_features, const FuseParams& p,
                 FusionKind kind) {
  const std::size_t d = t.value(h).cols();
  if (kind == FusionKind::Add)
    return ops::add(t, ops::gather_rows(t, h, neighbor), ops::linear(t, edge_features, p.w_edge, p.b_edge));

  Var top = p.w_fuse, bottom = p.w_fuse;
  if (kind == FusionKind::Concat) {
    top = ops::slice_rows(t, p.w_fuse, 0, d);
    bottom = ops::slice_rows(t, p.w_fuse, d, 2 * d);
  }
  Var node_part = ops::matmul(t, h, top);
  Var w_edge = ops::matmul(t, p.w_edge, bottom);
  Var b_row = ops::matmul(t, ops::reshape(t, p.b_edge, Shape{1, d}), bottom);
  Var bias = ops::add(t, ops::reshape(t, b_row, Shape{d}), p.b_fuse);
  return ops::add(t, ops::gather_rows(t, node_part, neighbor), ops::linear(t, edge_features, w_edge, bias));
}

NodeAttention node_attention(Tape& t, Var query, Var fused, const std::vector<std::size_t>& target,
                             std::size_t targets, double lambda) {
  Var scores = ops::row_dot(t, ops::gather_rows(t, query, target), fused);
  Var alpha = ops::segment_softmax(t, scores, target, targets, lambda);
  Var agg = ops::segment_sum(t, ops::scale_rows(t, fused, alpha), target, targets);
  return {agg, alpha};
}

PathAttention path_attention(Tape& t, const std::vector<Var>& channels, Var w_p, Var b_p, Var q) {
  if (channels.empty()) throw ContractError("path attention needs at least one channel");
  std::vector<Var> scores;
  scores.reserve(channels.size());
  for (Var z : channels) scores.push_back(ops::mean_all(t, ops::matvec(t, ops::tanh(t, ops::linear(t, z, w_p, b_p)), q)));
  Var beta = ops::softmax(t, ops::stack(t, scores));
  return {ops::weighted_sum(t, channels, beta), beta};
}

HatEncoder::HatEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store,
                       const std::string& prefix, std::uint64_t seed)
    : Encoder(config, schema, prefix) {
  const std::size_t d = config_.hidden;
  if (schema_.channels.empty()) throw SchemaError("HAT needs at least one relation");
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string lp = "l" + std::to_string(l) + "/";
    Layer layer;
    for (std::size_t m = 0; m < config_.heads; ++m) {
      const std::string hp = lp + "h" + std::to_string(m) + "/";
      Head head;
      for (const auto& ty : schema_.type_names) {
        head.w_node.push_back(&make_weight(store, hp + "node/" + ty + "/W", Shape{input_dim(l), d}, seed));
        head.b_node.push_back(&make_bias(store, hp + "node/" + ty + "/b", d));
      }
      for (const auto& ch : schema_.channels) {
        head.w_edge.push_back(&make_weight(store, hp + "edge/" + ch.name + "/W", Shape{ch.edge_dim, d}, seed));
        head.b_edge.push_back(&make_bias(store, hp + "edge/" + ch.name + "/b", d));
        if (config_.fusion == FusionKind::Add) {
          head.w_fuse.push_back(nullptr);
          head.b_fuse.push_back(nullptr);
        } else {
          const std::size_t rows = config_.fusion == FusionKind::Concat ? 2 * d : d;
          head.w_fuse.push_back(&make_weight(store, hp + "fuse/" + ch.name + "/W", Shape{rows, d}, seed));
          head.b_fuse.push_back(&make_bias(store, hp + "fuse/" + ch.name + "/b", d));
        }
      }
      layer.heads.push_back(std::move(head));
    }
    if (config_.concat_heads)
      for (const auto& ch : schema_.channels) {
        layer.w_heads.push_back(&make_weight(store, lp + "heads/" + ch.name + "/W", Shape{config_.heads * d, d}, seed));
        layer.b_heads.push_back(&make_bias(store, lp + "heads/" + ch.name + "/b", d));
      }
    layer.w_path = &make_weight(store, lp + "path/W", Shape{d, d}, seed);
    layer.b_path = &make_bias(store, lp + "path/b", d);
    layer.q_path = &make_weight(store, lp + "path/q", Shape{d}, seed);
    layers_.push_back(std::move(layer));
  }
}

Var HatEncoder::layer_forward(Tape& t, std::size_t l, Var x, const Subgraph& sg, const std::vector<std::size_t>& types,
                              std::size_t n_out) {
  const Layer& layer = layers_[l];
  const std::size_t n_in = t.value(x).rows();
  const std::span<const std::size_t> in_types(types.data(), n_in);

  std::vector<Var> h(config_.heads);
  for (std::size_t m = 0; m < config_.heads; ++m) {
    std::vector<Var> w, b;
    for (auto* p : layer.heads[m].w_node) w.push_back(t.param(*p));
    for (auto* p : layer.heads[m].b_node) b.push_back(t.param(*p));
    h[m] = ops::typed_linear(t, x, in_types, w, b);
  }

  std::vector<std::size_t> self(n_out);
  std::iota(self.begin(), self.end(), 0);
  std::vector<Var> z;
  for (std::size_t c = 0; c < sg.channels.size(); ++c) {
    const auto& ch = sg.channels[c];
    const std::size_t E = ch.entries_for(n_out);
    std::vector<std::size_t> target(ch.target.begin(), ch.target.begin() + static_cast<std::ptrdiff_t>(E));
    std::vector<std::size_t> neighbor(ch.neighbor.begin(), ch.neighbor.begin() + static_cast<std::ptrdiff_t>(E));
    target.insert(target.end(), self.begin(), self.end());
    neighbor.insert(neighbor.end(), self.begin(), self.end());
    // Self-loop rows carry zero edge features.
    Tensor ef(Shape{E + n_out, ch.edge_dim});
    std::copy(ch.edge_features.begin(), ch.edge_features.begin() + static_cast<std::ptrdiff_t>(E * ch.edge_dim),
              ef.values().begin());
    Var edge_features = t.constant(std::move(ef));

    std::vector<Var> aggs;
    for (std::size_t m = 0; m < config_.heads; ++m) {
      const Head& head = layer.heads[m];
      FuseParams p;
      p.w_edge = t.param(*head.w_edge[c]);
      p.b_edge = t.param(*head.b_edge[c]);
      if (head.w_fuse[c]) {
        p.w_fuse = t.param(*head.w_fuse[c]);
        p.b_fuse = t.param(*head.b_fuse[c]);
      }
      Var fused = fuse_entries(t, h[m], neighbor, edge_features, p, config_.fusion);
      Var query = ops::slice_rows(t, h[m], 0, n_out);
      auto att = node_attention(t, query, fused, target, n_out, config_.lambda());
      if (trace_) trace_->alpha.push_back(att.alpha);
      aggs.push_back(att.aggregate);
    }
    Var pre = config_.concat_heads
                  ? ops::linear(t, ops::concat_cols(t, aggs), t.param(*layer.w_heads[c]), t.param(*layer.b_heads[c]))
                  : (aggs.size() == 1 ? aggs[0] : ops::sum_of(t, aggs));
    z.push_back(ops::elu(t, pre));
  }

  auto path = path_attention(t, z, t.param(*layer.w_path), t.param(*layer.b_path), t.param(*layer.q_path));
  if (trace_) trace_->beta.push_back(path.beta);
  return path.z;
}

Var HatEncoder::forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) {
  const std::size_t K = config_.layers;
  if (sg.hops() != K)
    throw ContractError("subgraph has " + std::to_string(sg.hops()) + " hops but the encoder has " +
                        std::to_string(K) + " layers");
  if (sg.channels.size() != schema_.channels.size()) throw ContractError("subgraph channels differ from the schema");
  if (graph.feature_dim() != schema_.feature_dim) throw DimensionError("feature width differs from the schema");
  std::vector<std::size_t> types(sg.nodes.size());
  for (std::size_t i = 0; i < sg.nodes.size(); ++i) types[i] = graph.node_type[sg.nodes[i]];
  if (trace_) *trace_ = {};

  Var x = t.constant(gather_features(sg, graph));
  for (std::size_t l = 0; l < K; ++l) {
    x = layer_forward(t, l, x, sg, types, sg.level_size[K - 1 - l]);
    x = layer_dropout(t, x, l, training, dropout_key);
  }
  return x;
}

}  // namespace vsplit::hat
