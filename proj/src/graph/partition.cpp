#include "vsplit/graph/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

using nlohmann::json;

void PartitionSpec::validate(const HetGraph& g) const {
  if (participants == 0) throw ConfigError("partition needs at least one participant");
  if (feature_columns.size() != participants)
    throw ConfigError("partition lists " + std::to_string(feature_columns.size()) + " feature ranges for " +
                      std::to_string(participants) + " participants");
  std::size_t next = 0;
  for (std::size_t i = 0; i < participants; ++i) {
    const auto [b, e] = feature_columns[i];
    if (b != next || e < b)
      throw ConfigError("feature range of participant " + std::to_string(i) + " is [" + std::to_string(b) + "," +
                        std::to_string(e) + "), expected to start at " + std::to_string(next));
    next = e;
  }
  if (next != g.feature_dim())
    throw ConfigError("feature ranges cover " + std::to_string(next) + " columns but the graph has " +
                      std::to_string(g.feature_dim()));
  if (label_holder >= participants) throw ConfigError("label holder index out of range");
  if (ratio.size() != participants) throw ConfigError("ratio length differs from participant count");
  for (double r : ratio)
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("ratio entries must be positive");
  for (const auto& [name, _] : g.relations)
    if (!relations.contains(name)) throw ConfigError("partition does not assign relation '" + name + "'");
  for (const auto& [name, a] : relations) {
    if (!g.relations.contains(name)) throw ConfigError("partition assigns unknown relation '" + name + "'");
    if (!a.shared && a.owner >= participants) throw ConfigError("relation '" + name + "' owner out of range");
  }
}

std::string partition_spec_to_json(const PartitionSpec& s) {
  json j;
  j["participants"] = s.participants;
  j["feature_columns"] = json::array();
  for (const auto& [b, e] : s.feature_columns) j["feature_columns"].push_back({b, e});
  j["relations"] = json::object();
  for (const auto& [name, a] : s.relations) {
    json r{{"mode", a.shared ? "shared" : "owner"}};
    if (!a.shared) r["owner"] = a.owner;
    j["relations"][name] = r;
  }
  j["label_holder"] = s.label_holder;
  j["ratio"] = s.ratio;
  return j.dump(2);
}

PartitionSpec parse_partition_spec(std::string_view text) {
  PartitionSpec s;
  try {
    const json j = json::parse(text);
    s.participants = j.at("participants");
    for (const auto& r : j.at("feature_columns")) {
      if (!r.is_array() || r.size() != 2) throw ConfigError("feature_columns entries must be [begin, end]");
      s.feature_columns.emplace_back(r[0].get<std::size_t>(), r[1].get<std::size_t>());
    }
    for (auto it = j.at("relations").begin(); it != j.at("relations").end(); ++it) {
      RelationAssignment a;
      const std::string mode = it.value().at("mode");
      if (mode == "owner") {
        a.shared = false;
        a.owner = it.value().at("owner");
      } else if (mode != "shared") {
        throw ConfigError("relation '" + it.key() + "': mode must be shared or owner");
      }
      s.relations.emplace(it.key(), a);
    }
    s.label_holder = j.value("label_holder", std::size_t{0});
    s.ratio = j.value("ratio", std::vector<double>(s.participants, 1.0));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("partition spec: ") + e.what());
  }
  return s;
}

std::vector<std::size_t> ratio_counts(std::size_t total, std::span<const double> ratio) {
  if (ratio.empty()) throw ConfigError("empty ratio");
  const double sum = std::accumulate(ratio.begin(), ratio.end(), 0.0);
  std::vector<std::size_t> counts(ratio.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < ratio.size(); ++i) {
    counts[i] = static_cast<std::size_t>(std::floor(static_cast<double>(total) * ratio[i] / sum));
    counts[i] = std::min(counts[i], total - used);
    used += counts[i];
  }
  counts.back() = total - used;
  return counts;
}

PartitionSpec make_partition_spec(const HetGraph& g, std::vector<double> ratio, std::size_t label_holder) {
  PartitionSpec s;
  s.participants = ratio.size();
  s.label_holder = label_holder;
  const auto cols = ratio_counts(g.feature_dim(), ratio);
  std::size_t at = 0;
  for (std::size_t c : cols) {
    s.feature_columns.emplace_back(at, at + c);
    at += c;
  }
  for (const auto& [name, _] : g.relations) s.relations.emplace(name, RelationAssignment{});
  s.ratio = std::move(ratio);
  s.validate(g);
  return s;
}

std::vector<LocalView> vertical_partition(const DatasetBundle& bundle, const PartitionSpec& spec, std::uint64_t seed) {
  const HetGraph& g = bundle.graph;
  spec.validate(g);
  const std::size_t I = spec.participants;
  std::vector<LocalView> views(I);
  for (std::size_t i = 0; i < I; ++i) {
    auto& v = views[i];
    v.participant = i;
    v.label_holder = i == spec.label_holder;
    v.feature_columns = spec.feature_columns[i];
    v.graph.type_names = g.type_names;
    v.graph.node_type = g.node_type;
    v.graph.external_ids = g.external_ids;
    const auto [b, e] = spec.feature_columns[i];
    v.graph.features = Tensor(Shape{g.node_count(), e - b});
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      auto src = g.features.row(n);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(b), src.begin() + static_cast<std::ptrdiff_t>(e),
                v.graph.features.row(n).begin());
    }
    v.graph.num_classes = g.num_classes;
    if (v.label_holder) v.graph.labels = g.labels;
  }

  for (const auto& [name, rel] : g.relations) {
    const auto& assign = spec.relations.at(name);
    std::vector<std::size_t> owner(rel.edge_count(), assign.owner);
    if (assign.shared) {
      std::vector<std::size_t> order(rel.edge_count());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(seed, {hash_string(name)}));
      std::shuffle(order.begin(), order.end(), rng);
      const auto counts = ratio_counts(rel.edge_count(), spec.ratio);
      std::size_t at = 0;
      for (std::size_t i = 0; i < I; ++i)
        for (std::size_t k = 0; k < counts[i]; ++k) owner[order[at++]] = i;
    }
    for (std::size_t i = 0; i < I; ++i) {
      Relation local;
      local.name = name;
      local.src_type = rel.src_type;
      local.dst_type = rel.dst_type;
      local.edge_dim = rel.edge_dim;
      auto& origin = views[i].edge_origin[name];
      for (std::size_t e = 0; e < rel.edge_count(); ++e)
        if (owner[e] == i) {
          local.add_edge(rel.src[e], rel.dst[e], rel.edge_feature(e));
          origin.push_back(e);
        }
      views[i].graph.relations.emplace(name, std::move(local));
    }
  }
  return views;
}

}  // namespace vsplit
