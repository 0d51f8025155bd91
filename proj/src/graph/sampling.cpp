#include "vsplit/graph/sampling.hpp"

#include <algorithm>
#include <unordered_map>

#include "vsplit/core/errors.hpp"

namespace vsplit {

GraphIndex::GraphIndex(const HetGraph& g) : graph_(&g) {
  const std::size_t n = g.node_count();
  for (const auto& [name, rel] : g.relations) {
    names_.push_back(name);
    auto build = [&](const std::vector<std::size_t>& key, const std::vector<std::size_t>& other) {
      Csr csr;
      csr.offsets.assign(n + 1, 0);
      for (std::size_t v : key) ++csr.offsets[v + 1];
      for (std::size_t v = 0; v < n; ++v) csr.offsets[v + 1] += csr.offsets[v];
      csr.items.resize(key.size());
      std::vector<std::size_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
      for (std::size_t e = 0; e < key.size(); ++e) csr.items[fill[key[e]]++] = {other[e], e};
      return csr;
    };
    out_.push_back(build(rel.src, rel.dst));
    in_.push_back(build(rel.dst, rel.src));
  }
}

std::size_t GraphIndex::relation_id(std::string_view name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) throw SchemaError("unknown relation '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::span<const GraphIndex::Adjacent> GraphIndex::out(std::size_t rel, std::size_t v) const {
  const auto& c = out_[rel];
  return {c.items.data() + c.offsets[v], c.offsets[v + 1] - c.offsets[v]};
}

std::span<const GraphIndex::Adjacent> GraphIndex::in(std::size_t rel, std::size_t v) const {
  const auto& c = in_[rel];
  return {c.items.data() + c.offsets[v], c.offsets[v + 1] - c.offsets[v]};
}

void GraphIndex::neighbors(std::size_t rel, std::size_t v, std::vector<Adjacent>& result) const {
  result.clear();
  for (const auto& a : out(rel, v)) result.push_back(a);
  for (const auto& a : in(rel, v))
    if (a.node != v) result.push_back(a);
}

std::vector<MetapathInstance> enumerate_instances(const GraphIndex& index, const Metapath& mp, std::size_t root) {
  std::vector<std::size_t> rel_ids;
  for (const auto& step : mp.steps) rel_ids.push_back(index.relation_id(step.relation));
  std::vector<MetapathInstance> result;
  MetapathInstance cur;
  cur.nodes.push_back(root);
  auto dfs = [&](auto&& self, std::size_t depth) -> void {
    if (depth == mp.length()) {
      result.push_back(cur);
      return;
    }
    const std::size_t at = cur.nodes.back();
    auto adj = mp.steps[depth].reverse ? index.in(rel_ids[depth], at) : index.out(rel_ids[depth], at);
    for (const auto& a : adj) {
      if (std::find(cur.nodes.begin(), cur.nodes.end(), a.node) != cur.nodes.end()) continue;
      cur.nodes.push_back(a.node);
      cur.edges.push_back(a.edge);
      self(self, depth + 1);
      cur.nodes.pop_back();
      cur.edges.pop_back();
    }
  };
  dfs(dfs, 0);
  return result;
}

std::size_t ChannelEdges::entries_for(std::size_t n_targets) const {
  return static_cast<std::size_t>(std::lower_bound(target.begin(), target.end(), n_targets) - target.begin());
}

std::size_t Subgraph::position(std::size_t global) const {
  auto end = nodes.begin() + static_cast<std::ptrdiff_t>(target_count());
  auto it = std::lower_bound(nodes.begin(), end, global);
  if (it == end || *it != global) throw ContractError("node " + std::to_string(global) + " is not a batch target");
  return static_cast<std::size_t>(it - nodes.begin());
}

Subgraph sample_subgraph(const GraphIndex& index, std::span<const std::size_t> targets,
                         std::span<const Metapath> metapaths, std::size_t hops, std::size_t node_budget) {
  if (hops < 1) throw ContractError("sample_subgraph needs at least one hop");
  const HetGraph& g = index.graph();
  for (std::size_t v : targets)
    if (v >= g.node_count()) throw ContractError("target " + std::to_string(v) + " is not a node");
  for (const auto& mp : metapaths) check_metapath(g, mp);

  Subgraph sg;
  sg.nodes.assign(targets.begin(), targets.end());
  std::sort(sg.nodes.begin(), sg.nodes.end());
  sg.nodes.erase(std::unique(sg.nodes.begin(), sg.nodes.end()), sg.nodes.end());
  sg.level_size.push_back(sg.nodes.size());

  const std::size_t n_rel = index.relation_names().size();
  std::vector<std::vector<std::size_t>> neighbor_global(n_rel + metapaths.size());
  for (std::size_t r = 0; r < n_rel; ++r) {
    ChannelEdges ch;
    ch.name = index.relation_names()[r];
    ch.edge_dim = g.relation(ch.name).edge_dim;
    sg.channels.push_back(std::move(ch));
  }
  for (const auto& mp : metapaths) {
    ChannelEdges ch;
    ch.name = mp.name();
    ch.metapath = true;
    ch.edge_dim = metapath_feature_dim(g, mp);
    sg.channels.push_back(std::move(ch));
  }

  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < sg.nodes.size(); ++i) local.emplace(sg.nodes[i], i);

  std::vector<GraphIndex::Adjacent> adj;
  std::size_t begin = 0;
  for (std::size_t k = 1; k <= hops; ++k) {
    const std::size_t end = sg.nodes.size();
    std::vector<std::size_t> fresh;
    auto reach = [&](std::size_t v) {
      if (!local.contains(v)) {
        local.emplace(v, static_cast<std::size_t>(-1));
        fresh.push_back(v);
      }
    };
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t v = sg.nodes[i];
      for (std::size_t r = 0; r < n_rel; ++r) {
        auto& ch = sg.channels[r];
        const Relation& rel = g.relation(ch.name);
        index.neighbors(r, v, adj);
        for (const auto& a : adj) {
          ch.target.push_back(i);
          neighbor_global[r].push_back(a.node);
          auto ef = rel.edge_feature(a.edge);
          ch.edge_features.insert(ch.edge_features.end(), ef.begin(), ef.end());
          reach(a.node);
        }
      }
      for (std::size_t m = 0; m < metapaths.size(); ++m) {
        auto& ch = sg.channels[n_rel + m];
        for (auto& inst : enumerate_instances(index, metapaths[m], v)) {
          ch.target.push_back(i);
          neighbor_global[n_rel + m].push_back(inst.nodes.back());
          auto ef = instance_features(g, metapaths[m], inst);
          ch.edge_features.insert(ch.edge_features.end(), ef.begin(), ef.end());
          reach(inst.nodes.back());
          ch.instances.push_back(std::move(inst));
        }
      }
    }
    std::sort(fresh.begin(), fresh.end());
    for (std::size_t v : fresh) {
      local[v] = sg.nodes.size();
      sg.nodes.push_back(v);
    }
    if (sg.nodes.size() > node_budget)
      throw ResourceError("batch expands to " + std::to_string(sg.nodes.size()) + " nodes within " +
                          std::to_string(k) + " hops, over the budget of " + std::to_string(node_budget));
    sg.level_size.push_back(sg.nodes.size());
    begin = end;
  }

  for (std::size_t c = 0; c < sg.channels.size(); ++c) {
    auto& ch = sg.channels[c];
    ch.neighbor.reserve(neighbor_global[c].size());
    for (std::size_t v : neighbor_global[c]) ch.neighbor.push_back(local.at(v));
  }
  return sg;
}

}  // namespace vsplit
