#include "vsplit/graph/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "json.hpp"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

}  // namespace

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  reject_unknown(j,
                 {"node_types", "relations", "metapaths", "feature_dim", "num_classes", "homophily",
                  "class_separation", "feature_noise", "edge_signal", "labeled_types", "train_fraction",
                  "val_fraction", "seed"},
                 "synthetic spec");
  SyntheticSpec s;
  try {
    for (const auto& t : j.at("node_types")) s.node_types.emplace_back(t.at("name"), t.at("count"));
    for (const auto& r : j.at("relations")) {
      reject_unknown(r, {"name", "src", "dst", "edges", "edge_dim"}, "synthetic relation");
      s.relations.push_back({r.at("name"), r.at("src"), r.at("dst"), r.at("edges"), r.value("edge_dim", 0u)});
    }
    s.metapaths = j.value("metapaths", std::vector<std::string>{});
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.homophily = j.value("homophily", s.homophily);
    s.class_separation = j.value("class_separation", s.class_separation);
    s.feature_noise = j.value("feature_noise", s.feature_noise);
    s.edge_signal = j.value("edge_signal", s.edge_signal);
    s.labeled_types = j.value("labeled_types", std::vector<std::string>{});
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.val_fraction = j.value("val_fraction", s.val_fraction);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

DatasetBundle generate_synthetic(const SyntheticSpec& spec) {
  if (spec.node_types.empty()) throw ConfigError("synthetic spec has no node types");
  if (spec.relations.empty()) throw ConfigError("synthetic spec needs at least one relation");
  if (!(spec.homophily >= 0.0 && spec.homophily <= 1.0)) throw ConfigError("homophily must lie in [0,1]");
  if (spec.num_classes == 0) throw ConfigError("num_classes must be positive");
  if (spec.train_fraction < 0 || spec.val_fraction < 0 || spec.train_fraction + spec.val_fraction > 1.0)
    throw ConfigError("train/val fractions must be nonnegative and sum to at most 1");

  DatasetBundle b;
  HetGraph& g = b.graph;
  std::vector<std::vector<std::size_t>> nodes_of_type;
  for (const auto& [name, count] : spec.node_types) {
    if (std::find(g.type_names.begin(), g.type_names.end(), name) != g.type_names.end())
      throw ConfigError("node type '" + name + "' declared twice");
    const std::size_t t = g.type_names.size();
    g.type_names.push_back(name);
    nodes_of_type.emplace_back();
    for (std::size_t k = 0; k < count; ++k) {
      nodes_of_type[t].push_back(g.node_count());
      g.node_type.push_back(t);
      g.external_ids.push_back("node:" + name + ":" + std::to_string(k));
    }
  }
  const std::size_t n = g.node_count();
  const std::size_t C = spec.num_classes;

  Rng class_rng(derive_seed(spec.seed, {1}));
  std::vector<std::size_t> cls(n);
  {
    std::uniform_int_distribution<std::size_t> pick(0, C - 1);
    for (auto& c : cls) c = pick(class_rng);
  }

  Rng feat_rng(derive_seed(spec.seed, {2}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t D = spec.feature_dim;
  std::vector<double> means(g.type_names.size() * C * D);
  for (auto& m : means) m = spec.class_separation * normal(feat_rng);
  g.features = Tensor(Shape{n, D});
  for (std::size_t v = 0; v < n; ++v) {
    const double* mu = &means[(g.node_type[v] * C + cls[v]) * D];
    auto row = g.features.row(v);
    for (std::size_t k = 0; k < D; ++k) row[k] = mu[k] + spec.feature_noise * normal(feat_rng);
  }

  for (const auto& sr : spec.relations) {
    if (g.relations.contains(sr.name)) throw ConfigError("relation '" + sr.name + "' declared twice");
    Relation rel;
    rel.name = sr.name;
    try {
      rel.src_type = g.type_index(sr.src_type);
      rel.dst_type = g.type_index(sr.dst_type);
    } catch (const SchemaError& e) {
      throw ConfigError("relation " + sr.name + ": " + e.what());
    }
    rel.edge_dim = sr.edge_dim;
    const auto& srcs = nodes_of_type[rel.src_type];
    const auto& dsts = nodes_of_type[rel.dst_type];
    if (srcs.empty() || dsts.empty())
      throw ConfigError("relation " + sr.name + " references a node type with zero nodes");
    std::vector<std::vector<std::size_t>> dst_by_class(C), dst_not_class(C);
    for (std::size_t v : dsts)
      for (std::size_t c = 0; c < C; ++c) (cls[v] == c ? dst_by_class : dst_not_class)[c].push_back(v);

    Rng rng(derive_seed(spec.seed, {3, hash_string(sr.name)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<double> ef(sr.edge_dim);
    for (std::size_t e = 0; e < sr.edges; ++e) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t s = srcs[std::uniform_int_distribution<std::size_t>(0, srcs.size() - 1)(rng)];
        const bool same = unit(rng) < spec.homophily;
        const auto& pool = same ? dst_by_class[cls[s]] : dst_not_class[cls[s]];
        if (pool.empty()) continue;
        const std::size_t d = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        if (s == d || !seen.emplace(s, d).second) continue;
        for (std::size_t k = 0; k < sr.edge_dim; ++k) ef[k] = normal(rng);
        if (sr.edge_dim) ef[0] += cls[s] == cls[d] ? spec.edge_signal : -spec.edge_signal;
        rel.add_edge(s, d, ef);
        break;
      }
    }
    g.relations.emplace(rel.name, std::move(rel));
  }

  std::vector<std::string> labeled = spec.labeled_types;
  if (labeled.empty()) labeled.push_back(g.type_names.front());
  g.num_classes = C;
  g.labels.assign(n, kUnlabeled);
  std::vector<std::size_t> pool;
  for (const auto& name : labeled) {
    std::size_t t;
    try {
      t = g.type_index(name);
    } catch (const SchemaError& e) {
      throw ConfigError(std::string("labeled_types: ") + e.what());
    }
    for (std::size_t v : nodes_of_type[t]) {
      g.labels[v] = static_cast<std::int64_t>(cls[v]);
      pool.push_back(v);
    }
  }
  std::sort(pool.begin(), pool.end());
  Rng split_rng(derive_seed(spec.seed, {4}));
  std::shuffle(pool.begin(), pool.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(static_cast<double>(pool.size()) * spec.train_fraction);
  const auto n_val = static_cast<std::size_t>(static_cast<double>(pool.size()) * spec.val_fraction);
  b.train.assign(pool.begin(), pool.begin() + n_train);
  b.val.assign(pool.begin() + n_train, pool.begin() + n_train + n_val);
  b.test.assign(pool.begin() + n_train + n_val, pool.end());
  for (auto* s : {&b.train, &b.val, &b.test}) std::sort(s->begin(), s->end());

  for (const auto& text : spec.metapaths) {
    try {
      Metapath mp = Metapath::parse(text);
      check_metapath(g, mp);
      b.metapaths.push_back(std::move(mp));
    } catch (const SchemaError& e) {
      throw ConfigError(std::string("metapath: ") + e.what());
    }
  }
  b.validate();
  return b;
}

}  // namespace vsplit
