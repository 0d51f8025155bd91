#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vsplit/graph/hetgraph.hpp"

namespace vsplit {

/// CSR adjacency per relation in both directions. Holds a pointer to the
/// graph, which must outlive the index.
class GraphIndex {
 public:
  struct Adjacent {
    std::size_t node;
    std::size_t edge;
  };

  explicit GraphIndex(const HetGraph& g);

  const HetGraph& graph() const noexcept { return *graph_; }
  const std::vector<std::string>& relation_names() const noexcept { return names_; }
  std::size_t relation_id(std::string_view name) const;

  /// Edges leaving v (v is the source).
  std::span<const Adjacent> out(std::size_t rel, std::size_t v) const;
  /// Edges entering v (v is the destination).
  std::span<const Adjacent> in(std::size_t rel, std::size_t v) const;

  /// Undirected neighbours of v under one relation: out-edges, then
  /// in-edges, each in edge order. A self-edge is listed once.
  void neighbors(std::size_t rel, std::size_t v, std::vector<Adjacent>& result) const;

 private:
  struct Csr {
    std::vector<std::size_t> offsets;
    std::vector<Adjacent> items;
  };
  const HetGraph* graph_;
  std::vector<std::string> names_;
  std::vector<Csr> out_, in_;
};

/// All simple paths rooted at `root` that follow the metapath's steps,
/// in depth-first order over edge order.
std::vector<MetapathInstance> enumerate_instances(const GraphIndex& index, const Metapath& mp, std::size_t root);

/// Neighbour entries of one channel (a relation or a metapath) for every
/// node whose embedding the encoder must compute. Entries are grouped by
/// target in ascending local order.
struct ChannelEdges {
  std::string name;
  bool metapath = false;
  std::size_t edge_dim = 0;
  std::vector<std::size_t> target;    // local index
  std::vector<std::size_t> neighbor;  // local index
  std::vector<double> edge_features;  // entries x edge_dim
  std::vector<MetapathInstance> instances;  // metapath channels only, aligned with entries

  std::size_t size() const noexcept { return target.size(); }
  /// Number of leading entries whose target is < n_targets.
  std::size_t entries_for(std::size_t n_targets) const;
};

/// Exhaustive K-hop computation graph for a batch. Local nodes are ordered
/// by (hop distance, id), so the nodes within k hops are a prefix of length
/// level_size[k]. Metapath endpoints count as one hop.
struct Subgraph {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> level_size;
  std::vector<ChannelEdges> channels;

  std::size_t hops() const noexcept { return level_size.size() - 1; }
  std::size_t target_count() const noexcept { return level_size.front(); }
  /// Local index of a batch node (binary search over the targets).
  std::size_t position(std::size_t global) const;
};

/// Channel order is relations in name order followed by `metapaths` in the
/// given order. Throws ResourceError when more than node_budget nodes are
/// reached and SchemaError for a metapath that does not fit the schema.
Subgraph sample_subgraph(const GraphIndex& index, std::span<const std::size_t> targets,
                         std::span<const Metapath> metapaths, std::size_t hops,
                         std::size_t node_budget = std::numeric_limits<std::size_t>::max());

}  // namespace vsplit
