#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/core/tensor.hpp"

namespace vsplit {

/// Edges of one relation type. Endpoint types are fixed per relation; edge
/// features are stored row-major, edge_dim values per edge.
struct Relation {
  std::string name;
  std::size_t src_type = 0;
  std::size_t dst_type = 0;
  std::size_t edge_dim = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<double> edge_features;

  std::size_t edge_count() const noexcept { return src.size(); }
  std::span<const double> edge_feature(std::size_t e) const {
    return {edge_features.data() + e * edge_dim, edge_dim};
  }
  void add_edge(std::size_t s, std::size_t d, std::span<const double> features);
};

inline constexpr std::int64_t kUnlabeled = -1;

/// Typed multigraph with dense node features. Node ids are 0..|V|-1; the
/// external id strings are what parties exchange (after hashing) during
/// alignment.
struct HetGraph {
  std::vector<std::string> type_names;
  std::vector<std::size_t> node_type;
  std::vector<std::string> external_ids;
  Tensor features{Shape{0, 0}};
  std::map<std::string, Relation> relations;
  std::vector<std::int64_t> labels;  // empty, or one entry per node (kUnlabeled allowed)
  std::size_t num_classes = 0;

  std::size_t node_count() const noexcept { return node_type.size(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  bool has_labels() const noexcept { return !labels.empty(); }
  std::size_t edge_count() const;

  std::size_t type_index(std::string_view name) const;
  const Relation& relation(std::string_view name) const;
  std::size_t label(std::size_t node) const;

  /// Throws SchemaError on any broken invariant.
  void validate() const;
};

struct MetapathStep {
  std::string relation;
  bool reverse = false;  // traverse dst -> src
  friend bool operator==(const MetapathStep&, const MetapathStep&) = default;
};

/// Sequence of relation steps. Text form is comma separated; a leading `~`
/// walks a relation against its direction, e.g. "~writes,writes" goes
/// paper <- author -> paper.
struct Metapath {
  std::vector<MetapathStep> steps;

  static Metapath parse(std::string_view text);
  std::string name() const;
  std::size_t length() const noexcept { return steps.size(); }
  friend bool operator==(const Metapath&, const Metapath&) = default;
};

struct MetapathEnds {
  std::size_t start_type;
  std::size_t end_type;
};

/// Checks every step names a relation and that adjacent steps meet at the
/// same node type.
MetapathEnds check_metapath(const HetGraph& g, const Metapath& mp);

/// Width of instance_features for this metapath.
std::size_t metapath_feature_dim(const HetGraph& g, const Metapath& mp);

/// Nodes v0..vL and the edge (index into the step's relation) used per step.
struct MetapathInstance {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;
  friend bool operator==(const MetapathInstance&, const MetapathInstance&) = default;
  friend auto operator<=>(const MetapathInstance&, const MetapathInstance&) = default;
};

/// f(v0), e1, f(v1), ..., eL, f(vL) laid end to end.
std::vector<double> instance_features(const HetGraph& g, const Metapath& mp, const MetapathInstance& inst);

struct DatasetBundle {
  HetGraph graph;
  std::vector<Metapath> metapaths;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  void validate() const;
};

}  // namespace vsplit
