#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vsplit/graph/hetgraph.hpp"

namespace vsplit {

struct SyntheticRelation {
  std::string name;
  std::string src_type;
  std::string dst_type;
  std::size_t edges = 0;
  std::size_t edge_dim = 0;
};

/// Stochastic block graph. Every node draws a latent class; each edge picks
/// a uniform source and then a same-class destination with probability
/// `homophily`, otherwise a destination from another class. Node features
/// are a per-(type, class) Gaussian mean plus isotropic noise. The first
/// edge feature is shifted by +edge_signal on same-class edges and by
/// -edge_signal otherwise; the rest are noise.
struct SyntheticSpec {
  std::vector<std::pair<std::string, std::size_t>> node_types;
  std::vector<SyntheticRelation> relations;
  std::vector<std::string> metapaths;
  std::size_t feature_dim = 16;
  std::size_t num_classes = 2;
  double homophily = 0.9;
  double class_separation = 1.0;
  double feature_noise = 1.0;
  double edge_signal = 0.5;
  std::vector<std::string> labeled_types;  // empty: the first type
  double train_fraction = 0.4;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Parses the JSON form; unknown keys are rejected so typos surface early.
SyntheticSpec parse_synthetic_spec(std::string_view json_text);

DatasetBundle generate_synthetic(const SyntheticSpec& spec);

}  // namespace vsplit
