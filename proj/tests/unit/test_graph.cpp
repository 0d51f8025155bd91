#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "vsplit/core/errors.hpp"
#include "vsplit/graph/dataset_io.hpp"
#include "vsplit/graph/partition.hpp"
#include "vsplit/graph/sampling.hpp"
#include "vsplit/graph/synthetic.hpp"

using namespace vsplit;
namespace fs = std::filesystem;

namespace {

const fs::path kTiny = fs::path(VSPLIT_SOURCE_DIR) / "data" / "fixture_tiny";

fs::path scratch_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("vsplit_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.node_types = {{"paper", 30}, {"author", 20}};
  s.relations = {{"cites", "paper", "paper", 40, 2}, {"writes", "author", "paper", 50, 1}};
  s.metapaths = {"~writes,writes", "cites,cites"};
  s.feature_dim = 6;
  s.num_classes = 3;
  s.homophily = 0.8;
  s.seed = seed;
  return s;
}

// Path graph a->b->c plus an isolated d, single relation.
HetGraph path_graph() {
  HetGraph g;
  g.type_names = {"n"};
  g.node_type = {0, 0, 0, 0};
  g.external_ids = {"a", "b", "c", "d"};
  g.features = Tensor(Shape{4, 1});
  Relation r;
  r.name = "r";
  r.add_edge(0, 1, {});
  r.add_edge(1, 2, {});
  g.relations.emplace("r", r);
  return g;
}

// Independent enumerator: walks every edge list directly instead of CSR.
std::set<MetapathInstance> brute_instances(const HetGraph& g, const Metapath& mp, std::size_t root) {
  std::set<MetapathInstance> out;
  std::vector<MetapathInstance> frontier{{{root}, {}}};
  for (const auto& step : mp.steps) {
    const Relation& r = g.relation(step.relation);
    std::vector<MetapathInstance> next;
    for (const auto& partial : frontier)
      for (std::size_t e = 0; e < r.edge_count(); ++e) {
        const std::size_t from = step.reverse ? r.dst[e] : r.src[e];
        const std::size_t to = step.reverse ? r.src[e] : r.dst[e];
        if (from != partial.nodes.back()) continue;
        if (std::count(partial.nodes.begin(), partial.nodes.end(), to)) continue;
        auto ext = partial;
        ext.nodes.push_back(to);
        ext.edges.push_back(e);
        next.push_back(ext);
      }
    frontier = std::move(next);
  }
  out.insert(frontier.begin(), frontier.end());
  return out;
}

}  // namespace

TEST_CASE("load_dataset: tiny fixture") {
  auto b = load_dataset(kTiny);
  CHECK(b.graph.node_count() == 3);
  CHECK(b.graph.relations.size() == 1);
  CHECK(b.graph.edge_count() == 2);
  CHECK(b.graph.feature_dim() == 2);
  CHECK(b.graph.num_classes == 2);
  CHECK(b.metapaths.size() == 1);
  CHECK(b.train == std::vector<std::size_t>{0});
  CHECK(b.test == std::vector<std::size_t>{2});
  CHECK(b.graph.relation("cites").edge_feature(1)[0] == -0.5);
}

TEST_CASE("load_dataset: errors carry file and line") {
  auto dir = scratch_dir("bad_edge");
  for (const auto& e : fs::directory_iterator(kTiny)) fs::copy(e.path(), dir / e.path().filename());
  {
    std::ofstream out(dir / "edges_cites.tsv");
    out << "a\tb\t0.5\n\nb\tzz\t1\n";
  }
  try {
    load_dataset(dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.file() == "edges_cites.tsv");
    CHECK(e.line() == 3);
  }
  {
    std::ofstream out(dir / "edges_cites.tsv");
    out << "a\tb\t0.5\nb\tc\tx\n";
  }
  CHECK_THROWS_AS(load_dataset(dir), ParseError);
  fs::remove(dir / "splits.tsv");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("load_dataset: reload and write round trip are exact") {
  auto a = load_dataset(kTiny);
  auto b = load_dataset(kTiny);
  CHECK(a.graph.features == b.graph.features);
  CHECK(a.graph.relation("cites").src == b.graph.relation("cites").src);

  auto syn = generate_synthetic(small_spec(4));
  auto dir = scratch_dir("roundtrip");
  write_dataset(syn, dir);
  auto back = load_dataset(dir);
  CHECK(back.graph.features == syn.graph.features);
  CHECK(back.graph.labels == syn.graph.labels);
  CHECK(back.graph.type_names == syn.graph.type_names);
  for (const auto& [name, rel] : syn.graph.relations) {
    const auto& r2 = back.graph.relation(name);
    CHECK(r2.src == rel.src);
    CHECK(r2.dst == rel.dst);
    CHECK(r2.edge_features == rel.edge_features);
  }
  CHECK(back.metapaths == syn.metapaths);
  CHECK(back.train == syn.train);
  CHECK(back.val == syn.val);
  CHECK(back.test == syn.test);
  fs::remove_all(dir);
}

TEST_CASE("generate_synthetic: homophily, determinism, config errors") {
  auto spec = small_spec(1);
  spec.homophily = 1.0;
  spec.num_classes = 2;
  spec.labeled_types = {"paper", "author"};
  auto b = generate_synthetic(spec);
  for (const auto& [_, rel] : b.graph.relations)
    for (std::size_t e = 0; e < rel.edge_count(); ++e)
      CHECK(b.graph.labels[rel.src[e]] == b.graph.labels[rel.dst[e]]);

  auto x = generate_synthetic(small_spec(9));
  auto y = generate_synthetic(small_spec(9));
  auto z = generate_synthetic(small_spec(10));
  CHECK(x.graph.relation("cites").dst == y.graph.relation("cites").dst);
  CHECK(x.graph.features == y.graph.features);
  CHECK(x.graph.relation("cites").dst != z.graph.relation("cites").dst);

  auto empty_type = small_spec(1);
  empty_type.node_types[1].second = 0;
  CHECK_THROWS_AS(generate_synthetic(empty_type), ConfigError);
  auto bad_h = small_spec(1);
  bad_h.homophily = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad_h), ConfigError);
  auto bad_mp = small_spec(1);
  bad_mp.metapaths = {"writes,writes"};
  CHECK_THROWS_AS(generate_synthetic(bad_mp), ConfigError);
}

TEST_CASE("metapath parsing and schema checks") {
  auto mp = Metapath::parse("~writes, writes");
  CHECK(mp.length() == 2);
  CHECK(mp.steps[0].reverse);
  CHECK(mp.name() == "~writes,writes");
  CHECK_THROWS_AS(Metapath::parse("a,,b"), SchemaError);

  auto b = generate_synthetic(small_spec(2));
  auto ends = check_metapath(b.graph, mp);
  CHECK(ends.start_type == b.graph.type_index("paper"));
  CHECK(ends.end_type == b.graph.type_index("paper"));
  CHECK_THROWS_AS(check_metapath(b.graph, Metapath::parse("writes,writes")), SchemaError);
  CHECK_THROWS_AS(check_metapath(b.graph, Metapath::parse("nope")), SchemaError);
  CHECK(metapath_feature_dim(b.graph, mp) == 3 * 6 + 2);
}

TEST_CASE("sample_subgraph: isolated node and path-graph instances") {
  auto g = path_graph();
  GraphIndex idx(g);
  std::vector<Metapath> mps{Metapath::parse("r,r")};
  std::vector<std::size_t> iso{3};
  auto sg = sample_subgraph(idx, iso, mps, 2);
  CHECK(sg.nodes == std::vector<std::size_t>{3});
  for (const auto& ch : sg.channels) CHECK(ch.size() == 0);

  auto inst = enumerate_instances(idx, mps[0], 0);
  REQUIRE(inst.size() == 1);
  CHECK(inst[0].nodes == std::vector<std::size_t>{0, 1, 2});
  CHECK(enumerate_instances(idx, mps[0], 2).empty());

  std::vector<std::size_t> a{0};
  auto sa = sample_subgraph(idx, a, mps, 1);
  CHECK(sa.level_size == std::vector<std::size_t>{1, 3});
  // relation neighbour b, metapath endpoint c
  CHECK(sa.channels[0].neighbor == std::vector<std::size_t>{1});
  CHECK(sa.nodes[sa.channels[1].neighbor[0]] == 2);
}

TEST_CASE("sample_subgraph: instances equal brute-force enumeration on random graphs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto b = generate_synthetic(small_spec(100 + seed));
    GraphIndex idx(b.graph);
    for (const auto& mp : b.metapaths) {
      const auto start = check_metapath(b.graph, mp).start_type;
      for (std::size_t v = 0; v < b.graph.node_count(); ++v) {
        if (b.graph.node_type[v] != start) continue;
        auto got = enumerate_instances(idx, mp, v);
        std::set<MetapathInstance> got_set(got.begin(), got.end());
        CHECK(got_set.size() == got.size());
        CHECK(got_set == brute_instances(b.graph, mp, v));
      }
    }
  }
}

TEST_CASE("sample_subgraph: hop levels match breadth-first search and ignore batch order") {
  auto b = generate_synthetic(small_spec(7));
  const auto& g = b.graph;
  GraphIndex idx(g);
  const std::size_t n = g.node_count();
  std::vector<std::set<std::size_t>> adj(n);
  for (const auto& [_, rel] : g.relations)
    for (std::size_t e = 0; e < rel.edge_count(); ++e) {
      adj[rel.src[e]].insert(rel.dst[e]);
      adj[rel.dst[e]].insert(rel.src[e]);
    }
  for (const auto& mp : b.metapaths)
    for (std::size_t v = 0; v < n; ++v)
      if (g.node_type[v] == check_metapath(g, mp).start_type)
        for (const auto& inst : enumerate_instances(idx, mp, v)) adj[v].insert(inst.nodes.back());

  std::vector<std::size_t> batch{5, 17, 2, 29};
  auto sg = sample_subgraph(idx, batch, b.metapaths, 2);
  std::set<std::size_t> reach(batch.begin(), batch.end());
  for (std::size_t k = 1; k <= 2; ++k) {
    auto cur = reach;
    for (std::size_t v : cur) reach.insert(adj[v].begin(), adj[v].end());
    std::set<std::size_t> got(sg.nodes.begin(), sg.nodes.begin() + static_cast<std::ptrdiff_t>(sg.level_size[k]));
    CHECK(got == reach);
  }

  std::vector<std::size_t> shuffled{29, 2, 17, 5};
  auto sg2 = sample_subgraph(idx, shuffled, b.metapaths, 2);
  CHECK(sg2.nodes == sg.nodes);
  for (std::size_t c = 0; c < sg.channels.size(); ++c) {
    CHECK(sg2.channels[c].target == sg.channels[c].target);
    CHECK(sg2.channels[c].neighbor == sg.channels[c].neighbor);
    CHECK(sg2.channels[c].edge_features == sg.channels[c].edge_features);
  }

  CHECK_THROWS_AS(sample_subgraph(idx, batch, b.metapaths, 2, 5), ResourceError);
}

TEST_CASE("vertical_partition: identity, counts, losslessness, label isolation") {
  auto b = generate_synthetic(small_spec(3));
  const auto& g = b.graph;

  auto one = vertical_partition(b, make_partition_spec(g, {1.0}), 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].graph.features == g.features);
  CHECK(one[0].graph.labels == g.labels);
  for (const auto& [name, rel] : g.relations) {
    CHECK(one[0].graph.relation(name).src == rel.src);
    CHECK(one[0].graph.relation(name).dst == rel.dst);
    CHECK(one[0].graph.relation(name).edge_features == rel.edge_features);
  }

  CHECK(ratio_counts(100, std::vector<double>{5, 5}) == std::vector<std::size_t>{50, 50});
  CHECK(ratio_counts(100, std::vector<double>{1, 9}) == std::vector<std::size_t>{10, 90});
  CHECK(ratio_counts(64, std::vector<double>{1, 9}) == std::vector<std::size_t>{6, 58});
  CHECK(ratio_counts(7, std::vector<double>{3, 7}) == std::vector<std::size_t>{2, 5});

  auto spec = make_partition_spec(g, {1, 9}, 1);
  CHECK(spec.feature_columns[0] == std::pair<std::size_t, std::size_t>{0, 0});
  auto views = vertical_partition(b, spec, 11);
  REQUIRE(views.size() == 2);
  CHECK(views[0].graph.relation("writes").edge_count() == 5);
  CHECK(views[1].graph.relation("writes").edge_count() == 45);
  CHECK(!views[0].graph.has_labels());
  CHECK(views[1].graph.labels == g.labels);

  auto spec3 = make_partition_spec(g, {1, 1, 1});
  auto v3 = vertical_partition(b, spec3, 11);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    std::vector<double> row;
    for (const auto& v : v3) row.insert(row.end(), v.graph.features.row(n).begin(), v.graph.features.row(n).end());
    CHECK(std::equal(row.begin(), row.end(), g.features.row(n).begin(), g.features.row(n).end()));
  }
  for (const auto& [name, rel] : g.relations) {
    std::vector<std::size_t> all;
    for (const auto& v : v3) {
      const auto& origin = v.edge_origin.at(name);
      const auto& local = v.graph.relation(name);
      CHECK(std::is_sorted(origin.begin(), origin.end()));
      for (std::size_t e = 0; e < origin.size(); ++e) {
        CHECK(local.src[e] == rel.src[origin[e]]);
        CHECK(local.dst[e] == rel.dst[origin[e]]);
      }
      all.insert(all.end(), origin.begin(), origin.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(rel.edge_count());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
  }
  CHECK(!v3[1].graph.has_labels());
  CHECK(!v3[2].graph.has_labels());

  auto owned = spec3;
  owned.relations["cites"] = {false, 2};
  auto vo = vertical_partition(b, owned, 11);
  CHECK(vo[2].graph.relation("cites").edge_count() == g.relation("cites").edge_count());
  CHECK(vo[0].graph.relation("cites").edge_count() == 0);

  auto bad = spec3;
  bad.feature_columns[1].second += 1;
  CHECK_THROWS_AS(vertical_partition(b, bad, 1), ConfigError);
  CHECK(parse_partition_spec(partition_spec_to_json(owned)) == owned);
}
