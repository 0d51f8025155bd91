#pragma once

#include <vector>

#include "vsplit/models/encoder.hpp"

namespace vsplit::hat {

/// Transform weights for one (node type, channel, layer, head). For
/// FusionKind::Add the fuse weights are unused.
struct FuseParams {
  Var w_node, b_node;
  Var w_edge, b_edge;
  Var w_fuse, b_fuse;
};

/// Row-wise h = f W_node + b_node, r = e W_edge + b_edge, then
///   concat: [h | r] W_fuse + b_fuse   (W_fuse is 2d x d)
///   add:    h + r
///   linear: (h + r) W_fuse + b_fuse   (W_fuse is d x d)
Var transform_and_fuse(Tape& t, Var f, Var e, const FuseParams& p, FusionKind kind);

/// Same map applied per neighbour entry, with h already transformed for
/// every node: entry k uses h[neighbor[k]] and edge_features[k]. For
/// concat and linear the product is split so the d x d multiply runs once
/// per node rather than once per entry.
Var fuse_entries(Tape& t, Var h, const std::vector<std::size_t>& neighbor, Var edge_features, const FuseParams& p,
                 FusionKind kind);

struct NodeAttention {
  Var aggregate;  // [targets x d], before the nonlinearity
  Var alpha;      // one weight per entry
};

/// alpha_k = softmax over entries sharing a target of lambda * <query[target_k], fused_k>,
/// aggregate[i] = sum_k alpha_k fused_k over entries of target i.
NodeAttention node_attention(Tape& t, Var query, Var fused, const std::vector<std::size_t>& target,
                             std::size_t targets, double lambda);

struct PathAttention {
  Var z;     // [n x d]
  Var beta;  // one weight per channel
};

/// w_c = mean_i <q, tanh(z_c[i] W_p + b_p)>, beta = softmax(w), z = sum_c beta_c z_c.
PathAttention path_attention(Tape& t, const std::vector<Var>& channels, Var w_p, Var b_p, Var q);

/// Tape handles of the attention weights from the last traced forward.
struct Trace {
  std::vector<Var> alpha;  // layer-major, then channel, then head
  std::vector<Var> beta;   // one per layer
};

class HatEncoder final : public Encoder {
 public:
  HatEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store, const std::string& prefix,
             std::uint64_t seed);

  Var forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) override;

  void set_trace(Trace* trace) noexcept { trace_ = trace; }

 private:
  struct Head {
    std::vector<Parameter*> w_node, b_node;  // per type
    std::vector<Parameter*> w_edge, b_edge;  // per channel
    std::vector<Parameter*> w_fuse, b_fuse;  // per channel, null for add
  };
  struct Layer {
    std::vector<Head> heads;
    std::vector<Parameter*> w_heads, b_heads;  // per channel, concat_heads only
    Parameter *w_path, *b_path, *q_path;
  };

  Var layer_forward(Tape& t, std::size_t l, Var x, const Subgraph& sg, const std::vector<std::size_t>& types,
                    std::size_t n_out);

  std::vector<Layer> layers_;
  Trace* trace_ = nullptr;
};

}  // namespace vsplit::hat
