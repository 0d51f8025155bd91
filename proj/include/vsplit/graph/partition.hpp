#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vsplit/graph/hetgraph.hpp"

namespace vsplit {

struct RelationAssignment {
  bool shared = true;     // split across participants by ratio
  std::size_t owner = 0;  // used when !shared
  friend bool operator==(const RelationAssignment&, const RelationAssignment&) = default;
};

struct PartitionSpec {
  std::size_t participants = 1;
  std::vector<std::pair<std::size_t, std::size_t>> feature_columns;  // [begin, end) per participant
  std::map<std::string, RelationAssignment> relations;
  std::size_t label_holder = 0;
  std::vector<double> ratio;

  /// Throws ConfigError when the spec does not fit the graph.
  void validate(const HetGraph& g) const;
  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

std::string partition_spec_to_json(const PartitionSpec& spec);
PartitionSpec parse_partition_spec(std::string_view json_text);

/// Splits `total` by ratio: every participant but the last gets
/// floor(total * r_i / sum r), the last takes the remainder.
std::vector<std::size_t> ratio_counts(std::size_t total, std::span<const double> ratio);

/// Feature columns and every relation's edges split by `ratio`.
PartitionSpec make_partition_spec(const HetGraph& g, std::vector<double> ratio, std::size_t label_holder = 0);

/// One participant's slice of the graph. Every view keeps all node ids,
/// types and relation schemas; features, edges and labels are restricted.
struct LocalView {
  std::size_t participant = 0;
  bool label_holder = false;
  HetGraph graph;
  std::pair<std::size_t, std::size_t> feature_columns;
  std::map<std::string, std::vector<std::size_t>> edge_origin;  // local edge -> edge in the full graph
};

/// Shared relations are split by a seeded shuffle of edge indices; each
/// participant keeps its edges in their original order.
std::vector<LocalView> vertical_partition(const DatasetBundle& bundle, const PartitionSpec& spec, std::uint64_t seed);

}  // namespace vsplit
