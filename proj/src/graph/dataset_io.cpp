#include "vsplit/graph/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include "vsplit/core/errors.hpp"

namespace vsplit {

namespace fs = std::filesystem;

namespace {

struct LineReader {
  explicit LineReader(const fs::path& path) : name(path.filename().string()), in(path) {
    if (!in) throw ParseError(name, 0, "cannot open file");
  }

  // Next non-blank line, tab-split.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in, buffer)) {
      ++line;
      if (!buffer.empty() && buffer.back() == '\r') buffer.pop_back();
      if (buffer.find_first_not_of(" \t") == std::string::npos) continue;
      fields.clear();
      std::string_view rest(buffer);
      for (;;) {
        auto tab = rest.find('\t');
        fields.push_back(rest.substr(0, tab));
        if (tab == std::string_view::npos) break;
        rest.remove_prefix(tab + 1);
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(name, line, what); }

  std::string name;
  std::ifstream in;
  std::string buffer;
  std::size_t line = 0;
};

std::vector<double> parse_floats(std::string_view text, LineReader& r) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (;;) {
    auto comma = text.find(',');
    auto tok = text.substr(0, comma);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
      r.fail("malformed number '" + std::string(tok) + "'");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

long long parse_int(std::string_view tok, LineReader& r) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
    r.fail("malformed integer '" + std::string(tok) + "'");
  return v;
}

void expect_fields(const std::vector<std::string_view>& f, std::size_t lo, std::size_t hi, LineReader& r) {
  if (f.size() < lo || f.size() > hi)
    r.fail("expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) + " fields, found " +
           std::to_string(f.size()));
}

void append_floats(std::string& out, std::span<const double> values) {
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    auto res = std::to_chars(buf, buf + sizeof buf, values[i]);
    out.append(buf, res.ptr);
  }
}

}  // namespace

DatasetBundle load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string(), 0, "not a directory");
  DatasetBundle b;
  HetGraph& g = b.graph;
  std::unordered_map<std::string, std::size_t> id_of;
  std::vector<std::string_view> f;

  {
    LineReader r(dir / "nodes.tsv");
    while (r.next(f)) {
      expect_fields(f, 2, 2, r);
      std::string id(f[0]);
      if (id.empty()) r.fail("empty node id");
      if (!id_of.emplace(id, g.node_count()).second) r.fail("duplicate node id '" + id + "'");
      auto it = std::find(g.type_names.begin(), g.type_names.end(), f[1]);
      if (it == g.type_names.end()) it = g.type_names.insert(g.type_names.end(), std::string(f[1]));
      g.node_type.push_back(static_cast<std::size_t>(it - g.type_names.begin()));
      g.external_ids.push_back(std::move(id));
    }
    if (g.node_count() == 0) r.fail("no nodes");
  }

  auto lookup = [&](std::string_view id, LineReader& r) {
    auto it = id_of.find(std::string(id));
    if (it == id_of.end()) r.fail("unknown node id '" + std::string(id) + "'");
    return it->second;
  };

  {
    LineReader r(dir / "features.tsv");
    std::vector<std::vector<double>> rows(g.node_count());
    std::vector<bool> seen(g.node_count(), false);
    std::size_t dim = 0;
    bool first = true;
    while (r.next(f)) {
      expect_fields(f, 1, 2, r);
      const std::size_t v = lookup(f[0], r);
      if (seen[v]) r.fail("duplicate feature row for '" + std::string(f[0]) + "'");
      seen[v] = true;
      rows[v] = parse_floats(f.size() > 1 ? f[1] : std::string_view{}, r);
      if (first) dim = rows[v].size();
      if (rows[v].size() != dim)
        r.fail("feature row has " + std::to_string(rows[v].size()) + " values, expected " + std::to_string(dim));
      first = false;
    }
    for (std::size_t v = 0; v < g.node_count(); ++v)
      if (!seen[v]) throw ParseError(r.name, r.line, "no feature row for node '" + g.external_ids[v] + "'");
    g.features = Tensor(Shape{g.node_count(), dim});
    for (std::size_t v = 0; v < g.node_count(); ++v) std::copy(rows[v].begin(), rows[v].end(), g.features.row(v).begin());
  }

  std::vector<fs::path> edge_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("edges_") && name.ends_with(".tsv")) edge_files.push_back(entry.path());
  }
  std::sort(edge_files.begin(), edge_files.end());
  if (edge_files.empty()) throw ParseError(dir.string(), 0, "no edges_<relation>.tsv files");
  for (const auto& path : edge_files) {
    const auto fname = path.filename().string();
    Relation rel;
    rel.name = fname.substr(6, fname.size() - 10);
    if (rel.name.empty()) throw ParseError(fname, 0, "empty relation name");
    LineReader r(path);
    bool first = true;
    while (r.next(f)) {
      expect_fields(f, 2, 3, r);
      const std::size_t s = lookup(f[0], r), d = lookup(f[1], r);
      auto ef = parse_floats(f.size() > 2 ? f[2] : std::string_view{}, r);
      if (first) {
        rel.src_type = g.node_type[s];
        rel.dst_type = g.node_type[d];
        rel.edge_dim = ef.size();
        first = false;
      }
      if (g.node_type[s] != rel.src_type || g.node_type[d] != rel.dst_type)
        r.fail("edge joins types " + g.type_names[g.node_type[s]] + "->" + g.type_names[g.node_type[d]] +
               " but the relation is " + g.type_names[rel.src_type] + "->" + g.type_names[rel.dst_type]);
      if (ef.size() != rel.edge_dim)
        r.fail("edge has " + std::to_string(ef.size()) + " features, expected " + std::to_string(rel.edge_dim));
      rel.add_edge(s, d, ef);
    }
    if (first) throw ParseError(fname, r.line, "relation has no edges, so its endpoint types are unknown");
    g.relations.emplace(rel.name, std::move(rel));
  }

  {
    LineReader r(dir / "labels.tsv");
    g.labels.assign(g.node_count(), kUnlabeled);
    long long max_label = -1;
    while (r.next(f)) {
      expect_fields(f, 2, 2, r);
      const std::size_t v = lookup(f[0], r);
      const long long c = parse_int(f[1], r);
      if (c < 0) r.fail("negative class index");
      if (g.labels[v] != kUnlabeled) r.fail("duplicate label for '" + std::string(f[0]) + "'");
      g.labels[v] = c;
      max_label = std::max(max_label, c);
    }
    g.num_classes = static_cast<std::size_t>(max_label + 1);
  }

  {
    LineReader r(dir / "metapaths.txt");
    while (r.next(f)) {
      std::string text(r.buffer);
      if (text.find_first_not_of(" \t") != std::string::npos && text[text.find_first_not_of(" \t")] == '#') continue;
      try {
        Metapath mp = Metapath::parse(text);
        check_metapath(g, mp);
        b.metapaths.push_back(std::move(mp));
      } catch (const SchemaError& e) {
        r.fail(e.what());
      }
    }
  }

  {
    LineReader r(dir / "splits.tsv");
    std::vector<bool> used(g.node_count(), false);
    while (r.next(f)) {
      expect_fields(f, 2, 2, r);
      const std::size_t v = lookup(f[0], r);
      if (used[v]) r.fail("node '" + std::string(f[0]) + "' listed twice");
      used[v] = true;
      if (g.labels[v] == kUnlabeled) r.fail("split node '" + std::string(f[0]) + "' has no label");
      if (f[1] == "train")
        b.train.push_back(v);
      else if (f[1] == "val")
        b.val.push_back(v);
      else if (f[1] == "test")
        b.test.push_back(v);
      else
        r.fail("unknown split '" + std::string(f[1]) + "'");
    }
  }

  b.validate();
  return b;
}

void write_dataset(const DatasetBundle& b, const fs::path& dir) {
  const HetGraph& g = b.graph;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  std::string buf;
  {
    auto out = open("nodes.tsv");
    for (std::size_t v = 0; v < g.node_count(); ++v) out << g.external_ids[v] << '\t' << g.type_names[g.node_type[v]] << '\n';
  }
  {
    auto out = open("features.tsv");
    for (std::size_t v = 0; v < g.node_count(); ++v) {
      buf = g.external_ids[v];
      buf += '\t';
      append_floats(buf, g.features.row(v));
      out << buf << '\n';
    }
  }
  for (const auto& [name, rel] : g.relations) {
    auto out = open("edges_" + name + ".tsv");
    for (std::size_t e = 0; e < rel.edge_count(); ++e) {
      buf = g.external_ids[rel.src[e]] + '\t' + g.external_ids[rel.dst[e]];
      if (rel.edge_dim) {
        buf += '\t';
        append_floats(buf, rel.edge_feature(e));
      }
      out << buf << '\n';
    }
  }
  {
    auto out = open("labels.tsv");
    if (g.has_labels())
      for (std::size_t v = 0; v < g.node_count(); ++v)
        if (g.labels[v] != kUnlabeled) out << g.external_ids[v] << '\t' << g.labels[v] << '\n';
  }
  {
    auto out = open("metapaths.txt");
    for (const auto& mp : b.metapaths) out << mp.name() << '\n';
  }
  {
    auto out = open("splits.tsv");
    const std::pair<const std::vector<std::size_t>*, const char*> splits[] = {
        {&b.train, "train"}, {&b.val, "val"}, {&b.test, "test"}};
    for (const auto& [ids, tag] : splits)
      for (std::size_t v : *ids) out << g.external_ids[v] << '\t' << tag << '\n';
  }
}

}  // namespace vsplit
