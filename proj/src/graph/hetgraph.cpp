#include "vsplit/graph/hetgraph.hpp"

#include <algorithm>
#include <unordered_set>

#include "vsplit/core/errors.hpp"

namespace vsplit {

void Relation::add_edge(std::size_t s, std::size_t d, std::span<const double> features) {
  if (features.size() != edge_dim)
    throw SchemaError("relation " + name + ": edge has " + std::to_string(features.size()) +
                      " features, expected " + std::to_string(edge_dim));
  src.push_back(s);
  dst.push_back(d);
  edge_features.insert(edge_features.end(), features.begin(), features.end());
}

std::size_t HetGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, r] : relations) n += r.edge_count();
  return n;
}

std::size_t HetGraph::type_index(std::string_view name) const {
  auto it = std::find(type_names.begin(), type_names.end(), name);
  if (it == type_names.end()) throw SchemaError("unknown node type '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - type_names.begin());
}

const Relation& HetGraph::relation(std::string_view name) const {
  auto it = relations.find(std::string(name));
  if (it == relations.end()) throw SchemaError("unknown relation '" + std::string(name) + "'");
  return it->second;
}

std::size_t HetGraph::label(std::size_t node) const {
  if (!has_labels() || labels.at(node) == kUnlabeled)
    throw RoleError("node " + std::to_string(node) + " has no label in this view");
  return static_cast<std::size_t>(labels[node]);
}

void HetGraph::validate() const {
  const std::size_t n = node_count();
  if (external_ids.size() != n) throw SchemaError("external id count does not match node count");
  if (features.rank() != 2 || features.rows() != n)
    throw SchemaError("feature matrix " + shape_string(features.shape()) + " does not have " + std::to_string(n) +
                      " rows");
  for (std::size_t v = 0; v < n; ++v)
    if (node_type[v] >= type_names.size()) throw SchemaError("node " + std::to_string(v) + " has no valid type");
  for (const auto& [name, r] : relations) {
    if (r.name != name) throw SchemaError("relation keyed '" + name + "' is named '" + r.name + "'");
    if (r.dst.size() != r.src.size() || r.edge_features.size() != r.src.size() * r.edge_dim)
      throw SchemaError("relation " + name + ": ragged edge arrays");
    for (std::size_t e = 0; e < r.edge_count(); ++e) {
      if (r.src[e] >= n || r.dst[e] >= n)
        throw SchemaError("relation " + name + ": edge " + std::to_string(e) + " has a dangling endpoint");
      if (node_type[r.src[e]] != r.src_type || node_type[r.dst[e]] != r.dst_type)
        throw SchemaError("relation " + name + ": edge " + std::to_string(e) + " joins the wrong node types");
    }
  }
  if (has_labels()) {
    if (labels.size() != n) throw SchemaError("label vector does not cover every node");
    for (std::size_t v = 0; v < n; ++v)
      if (labels[v] != kUnlabeled && (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= num_classes))
        throw SchemaError("node " + std::to_string(v) + " label " + std::to_string(labels[v]) + " outside [0," +
                          std::to_string(num_classes) + ")");
  }
}

Metapath Metapath::parse(std::string_view text) {
  Metapath mp;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view tok = text.substr(pos, comma - pos);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
    MetapathStep step;
    if (!tok.empty() && tok.front() == '~') {
      step.reverse = true;
      tok.remove_prefix(1);
    }
    if (tok.empty()) throw SchemaError("empty relation in metapath '" + std::string(text) + "'");
    step.relation = std::string(tok);
    mp.steps.push_back(std::move(step));
    pos = comma + 1;
  }
  return mp;
}

std::string Metapath::name() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ',';
    if (steps[i].reverse) out += '~';
    out += steps[i].relation;
  }
  return out;
}

MetapathEnds check_metapath(const HetGraph& g, const Metapath& mp) {
  if (mp.steps.empty()) throw SchemaError("metapath has no steps");
  MetapathEnds ends{0, 0};
  for (std::size_t k = 0; k < mp.steps.size(); ++k) {
    const auto& step = mp.steps[k];
    const Relation& r = g.relation(step.relation);
    const std::size_t from = step.reverse ? r.dst_type : r.src_type;
    const std::size_t to = step.reverse ? r.src_type : r.dst_type;
    if (k == 0)
      ends.start_type = from;
    else if (from != ends.end_type)
      throw SchemaError("metapath " + mp.name() + ": step " + std::to_string(k) + " starts at type '" +
                        g.type_names[from] + "' but the previous step ends at '" + g.type_names[ends.end_type] +
                        "'");
    ends.end_type = to;
  }
  return ends;
}

std::size_t metapath_feature_dim(const HetGraph& g, const Metapath& mp) {
  std::size_t dim = (mp.length() + 1) * g.feature_dim();
  for (const auto& step : mp.steps) dim += g.relation(step.relation).edge_dim;
  return dim;
}

std::vector<double> instance_features(const HetGraph& g, const Metapath& mp, const MetapathInstance& inst) {
  std::vector<double> out;
  out.reserve(metapath_feature_dim(g, mp));
  auto push_node = [&](std::size_t v) {
    auto row = g.features.row(v);
    out.insert(out.end(), row.begin(), row.end());
  };
  push_node(inst.nodes[0]);
  for (std::size_t k = 0; k < mp.length(); ++k) {
    auto ef = g.relation(mp.steps[k].relation).edge_feature(inst.edges[k]);
    out.insert(out.end(), ef.begin(), ef.end());
    push_node(inst.nodes[k + 1]);
  }
  return out;
}

void DatasetBundle::validate() const {
  graph.validate();
  for (const auto& mp : metapaths) check_metapath(graph, mp);
  std::unordered_set<std::size_t> seen;
  for (const auto* split : {&train, &val, &test})
    for (std::size_t v : *split) {
      if (v >= graph.node_count()) throw SchemaError("split references node " + std::to_string(v));
      if (!seen.insert(v).second) throw SchemaError("node " + graph.external_ids[v] + " appears in two splits");
      if (!graph.has_labels() || graph.labels[v] == kUnlabeled)
        throw SchemaError("split node " + graph.external_ids[v] + " has no label");
    }
}

}  // namespace vsplit
