#include "vsplit/experiment/experiment.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/rng.hpp"
#include "vsplit/graph/dataset_io.hpp"
#include "vsplit/protocol/centralized.hpp"

namespace vsplit {

using nlohmann::json;

RunStrategy RunStrategy::parse(const std::string& s) {
  RunStrategy r;
  if (s == "entire") {
    r.kind = Kind::Entire;
  } else if (s.starts_with("standalone_")) {
    r.kind = Kind::Standalone;
    const std::string idx = s.substr(11);
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), r.participant);
    if (ec != std::errc{} || ptr != idx.data() + idx.size() || idx.empty())
      throw ConfigError("bad standalone strategy '" + s + "' (expected standalone_<participant>)");
  } else if (s == "split_m") {
    r.combine = Strategy::Average;
  } else if (s == "split_c") {
    r.combine = Strategy::Concat;
  } else if (s == "split_w") {
    r.combine = Strategy::Weighted;
  } else {
    throw ConfigError("unknown strategy '" + s + "' (expected entire, standalone_<i>, split_m, split_c or split_w)");
  }
  return r;
}

std::string RunStrategy::name() const {
  switch (kind) {
    case Kind::Entire: return "entire";
    case Kind::Standalone: return "standalone_" + std::to_string(participant);
    case Kind::Split: break;
  }
  switch (combine) {
    case Strategy::Average: return "split_m";
    case Strategy::Concat: return "split_c";
    case Strategy::Weighted: return "split_w";
  }
  return "?";
}

std::vector<double> ExperimentConfig::shares() const {
  return ratio.empty() ? std::vector<double>(participants, 1.0) : ratio;
}

std::string ExperimentConfig::ratio_label() const {
  std::string out;
  for (double r : shares()) {
    if (!out.empty()) out += ':';
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, r);
    out.append(buf, res.ptr);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (dataset.empty() == !synthetic.has_value())
    throw ConfigError("exactly one of 'dataset' and 'synthetic' must be given");
  if (participants == 0) throw ConfigError("participants must be positive");
  if (!ratio.empty() && ratio.size() != participants)
    throw ConfigError("ratio has " + std::to_string(ratio.size()) + " entries for " + std::to_string(participants) +
                      " participants");
  for (double r : ratio)
    if (!(r > 0)) throw ConfigError("ratio entries must be positive");
  if (label_holder >= participants) throw ConfigError("label_holder out of range");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  parse_model_kind(model);
  RunStrategy::parse(strategy);
  session.validate();
  if (cost.rounds == 0 || cost.participants.empty() || cost.hidden.empty())
    throw ConfigError("cost grid needs rounds, participants and hidden sizes");
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

void parse_session(const json& j, SessionConfig& s) {
  reject_unknown(j,
                 {"batch_size", "hidden", "layers", "heads", "fusion", "concat_heads", "attention_scale",
                  "encoder_dropout", "gcn_include_self", "cut", "server_dropout", "epochs", "max_rounds", "optimizer",
                  "learning_rate", "secure", "key_bits", "scale_bits", "id_coverage", "eval_batch", "node_budget"},
                 "session");
  take(j, "batch_size", s.batch_size);
  take(j, "hidden", s.encoder.hidden);
  take(j, "layers", s.encoder.layers);
  take(j, "heads", s.encoder.heads);
  if (j.contains("fusion")) s.encoder.fusion = parse_fusion(j.at("fusion").get<std::string>());
  take(j, "concat_heads", s.encoder.concat_heads);
  take(j, "attention_scale", s.encoder.attention_scale);
  take(j, "encoder_dropout", s.encoder.dropout);
  take(j, "gcn_include_self", s.encoder.gcn_include_self);
  if (j.contains("cut")) s.cut = parse_cut(j.at("cut").get<std::string>());
  take(j, "server_dropout", s.server_dropout);
  take(j, "epochs", s.epochs);
  take(j, "max_rounds", s.max_rounds);
  if (j.contains("optimizer")) s.optimizer.kind = parse_optimizer(j.at("optimizer").get<std::string>());
  take(j, "learning_rate", s.optimizer.learning_rate);
  take(j, "secure", s.secure);
  take(j, "key_bits", s.key_bits);
  take(j, "scale_bits", s.scale_bits);
  take(j, "id_coverage", s.id_coverage);
  take(j, "eval_batch", s.eval_batch);
  take(j, "node_budget", s.node_budget);
}

json session_json(const SessionConfig& s) {
  json j;
  j["batch_size"] = s.batch_size;
  j["hidden"] = s.encoder.hidden;
  j["layers"] = s.encoder.layers;
  j["heads"] = s.encoder.heads;
  j["fusion"] = to_string(s.encoder.fusion);
  j["concat_heads"] = s.encoder.concat_heads;
  j["attention_scale"] = s.encoder.attention_scale;
  j["encoder_dropout"] = s.encoder.dropout;
  j["gcn_include_self"] = s.encoder.gcn_include_self;
  j["cut"] = to_string(s.cut);
  j["server_dropout"] = s.server_dropout;
  j["epochs"] = s.epochs;
  j["max_rounds"] = s.max_rounds;
  j["optimizer"] = to_string(s.optimizer.kind);
  j["learning_rate"] = s.optimizer.learning_rate;
  j["secure"] = s.secure;
  j["key_bits"] = s.key_bits;
  j["scale_bits"] = s.scale_bits;
  j["id_coverage"] = s.id_coverage;
  j["eval_batch"] = s.eval_batch;
  j["node_budget"] = s.node_budget;
  return j;
}

json synthetic_json(const SyntheticSpec& s) {
  json j;
  for (const auto& [name, count] : s.node_types) j["node_types"].push_back({{"name", name}, {"count", count}});
  for (const auto& r : s.relations)
    j["relations"].push_back(
        {{"name", r.name}, {"src", r.src_type}, {"dst", r.dst_type}, {"edges", r.edges}, {"edge_dim", r.edge_dim}});
  j["metapaths"] = s.metapaths;
  j["feature_dim"] = s.feature_dim;
  j["num_classes"] = s.num_classes;
  j["homophily"] = s.homophily;
  j["class_separation"] = s.class_separation;
  j["feature_noise"] = s.feature_noise;
  j["edge_signal"] = s.edge_signal;
  j["labeled_types"] = s.labeled_types;
  j["train_fraction"] = s.train_fraction;
  j["val_fraction"] = s.val_fraction;
  j["seed"] = s.seed;
  return j;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "synthetic", "participants", "ratio", "label_holder", "model", "strategy", "seeds",
                  "session", "cost"},
                 "experiment config");
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) {
      std::filesystem::path p = j.at("dataset").get<std::string>();
      c.dataset = p.is_relative() ? base_dir / p : p;
    }
    if (j.contains("synthetic")) {
      const json& s = j.at("synthetic");
      if (s.is_string()) {
        std::filesystem::path p = s.get<std::string>();
        c.synthetic = parse_synthetic_spec(read_text(p.is_relative() ? base_dir / p : p));
      } else {
        c.synthetic = parse_synthetic_spec(s.dump());
      }
    }
    take(j, "participants", c.participants);
    take(j, "ratio", c.ratio);
    take(j, "label_holder", c.label_holder);
    take(j, "model", c.model);
    take(j, "strategy", c.strategy);
    take(j, "seeds", c.seeds);
    if (j.contains("session")) parse_session(j.at("session"), c.session);
    if (j.contains("cost")) {
      const json& g = j.at("cost");
      reject_unknown(g, {"participants", "hidden", "rounds"}, "cost");
      take(g, "participants", c.cost.participants);
      take(g, "hidden", c.cost.hidden);
      take(g, "rounds", c.cost.rounds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.session.encoder.kind = parse_model_kind(c.model);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  if (!c.dataset.empty()) j["dataset"] = c.dataset.string();
  if (c.synthetic) j["synthetic"] = synthetic_json(*c.synthetic);
  j["participants"] = c.participants;
  j["ratio"] = c.shares();
  j["label_holder"] = c.label_holder;
  j["model"] = c.model;
  j["strategy"] = c.strategy;
  j["seeds"] = c.seeds;
  j["session"] = session_json(c.session);
  j["cost"] = {{"participants", c.cost.participants}, {"hidden", c.cost.hidden}, {"rounds", c.cost.rounds}};
  return j.dump(2);
}

std::string config_digest(const ExperimentConfig& c) {
  json j = json::parse(experiment_config_to_json(c));
  j.erase("seeds");
  const std::uint64_t h = hash_string(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetBundle load_experiment_data(const ExperimentConfig& c) {
  if (c.synthetic) return generate_synthetic(*c.synthetic);
  return load_dataset(c.dataset);
}

void ExperimentResult::append(ExperimentResult other) {
  metrics.insert(metrics.end(), other.metrics.begin(), other.metrics.end());
  cost.insert(cost.end(), other.cost.begin(), other.cost.end());
  timing.insert(timing.end(), other.timing.begin(), other.timing.end());
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
  for (auto& t : other.transcripts) transcripts.push_back(std::move(t));
}

namespace {

// In federated learning every party holds the whole model over all features.
std::size_t federated_model_size(const DatasetBundle& data, SessionConfig sc) {
  sc.strategy = Strategy::Average;
  return CentralizedModel(data, sc).model_size();
}

}  // namespace

std::uint64_t comm_cost_fl(std::size_t participants, std::size_t model_size, std::size_t rounds) {
  return static_cast<std::uint64_t>(rounds) * 2 * participants * model_size * 8;
}

std::uint64_t comm_cost_sl(const std::vector<const Transcript*>& transcripts) {
  std::uint64_t n = 0;
  for (const auto* t : transcripts) n += t->total_bytes();
  return n;
}

namespace {

void add_epochs(ExperimentResult& out, const ExperimentConfig& c, const std::string& digest, const std::string& strategy,
                std::uint64_t seed, const std::vector<EpochResult>& epochs) {
  for (const auto& e : epochs) {
    out.metrics.push_back({digest, c.model, strategy, c.participants, c.ratio_label(), seed, e.epoch, e.train_loss,
                           e.val_f1, e.test_f1});
    out.timing.push_back({digest, strategy, seed, e.epoch, e.seconds});
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetBundle& data) {
  config.validate();
  const RunStrategy rs = RunStrategy::parse(config.strategy);
  const std::string digest = config_digest(config);
  const auto spec = make_partition_spec(data.graph, config.shares(), config.label_holder);
  ExperimentResult out;

  for (std::uint64_t seed : config.seeds) {
    SessionConfig sc = config.session;
    sc.encoder.kind = parse_model_kind(config.model);
    sc.seed = seed;
    switch (rs.kind) {
      case RunStrategy::Kind::Entire: {
        CentralizedModel m(data, sc);
        add_epochs(out, config, digest, rs.name(), seed, m.train());
        break;
      }
      case RunStrategy::Kind::Standalone: {
        if (rs.participant >= config.participants)
          throw ConfigError("standalone participant " + std::to_string(rs.participant) + " does not exist");
        auto views = vertical_partition(data, spec, streams::partition(seed));
        HetGraph& g = views[rs.participant].graph;
        if (rs.participant != config.label_holder) {
          g.labels = data.graph.labels;
          out.notes.push_back(rs.name() + " seed " + std::to_string(seed) +
                              ": participant reads the label holder's labels (standalone concession)");
        }
        CentralizedModel m(data, sc, &g);
        add_epochs(out, config, digest, rs.name(), seed, m.train());
        break;
      }
      case RunStrategy::Kind::Split: {
        sc.strategy = rs.combine;
        Session s(data, spec, sc);
        s.align();
        add_epochs(out, config, digest, rs.name(), seed, s.train());
        const std::uint64_t sl = comm_cost_sl({&s.transcript()});
        const std::size_t fl_size = federated_model_size(data, sc);
        out.cost.push_back({config.model, rs.name(), sc.secure, config.participants, sc.batch_size, sc.encoder.hidden,
                            fl_size, s.rounds(), sl, comm_cost_fl(config.participants, fl_size, s.rounds())});
        out.transcripts.emplace_back(rs.name() + "_seed" + std::to_string(seed), s.transcript());
        break;
      }
    }
  }
  return out;
}

Grid parse_grid(const std::string& s) {
  if (s == "table1") return Grid::Table1;
  if (s == "table2") return Grid::Table2;
  if (s == "table3") return Grid::Table3;
  if (s == "cost") return Grid::Cost;
  throw ConfigError("unknown grid '" + s + "' (expected table1, table2, table3 or cost)");
}

ExperimentResult run_grid(Grid grid, const ExperimentConfig& config, const DatasetBundle& data) {
  ExperimentResult out;
  switch (grid) {
    case Grid::Table1:
      for (const char* model : {"gcn", "gat", "hat"}) {
        ExperimentConfig c = config;
        c.model = model;
        std::vector<std::string> strategies{"entire"};
        for (std::size_t i = 0; i < c.participants; ++i) strategies.push_back("standalone_" + std::to_string(i));
        for (const char* s : {"split_m", "split_c", "split_w"}) strategies.emplace_back(s);
        for (const auto& s : strategies) {
          c.strategy = s;
          out.append(run_experiment(c, data));
        }
      }
      break;
    case Grid::Table2:
      for (std::size_t I : {2u, 4u, 8u}) {
        ExperimentConfig c = config;
        c.strategy = "split_c";
        c.participants = I;
        c.ratio.clear();
        c.label_holder = 0;
        out.append(run_experiment(c, data));
      }
      break;
    case Grid::Table3:
      for (auto ratio : {std::vector<double>{5, 5}, std::vector<double>{3, 7}, std::vector<double>{1, 9}}) {
        ExperimentConfig c = config;
        c.strategy = "split_c";
        c.participants = 2;
        c.ratio = ratio;
        c.label_holder = 0;
        out.append(run_experiment(c, data));
      }
      break;
    case Grid::Cost: {
      RunStrategy rs = RunStrategy::parse(config.strategy);
      if (rs.kind != RunStrategy::Kind::Split) rs = RunStrategy::parse("split_m");
      for (std::size_t hidden : config.cost.hidden)
        for (std::size_t I : config.cost.participants) {
          SessionConfig sc = config.session;
          sc.encoder.kind = parse_model_kind(config.model);
          sc.encoder.hidden = hidden;
          sc.strategy = rs.combine;
          sc.seed = config.seeds.front();
          sc.max_rounds = config.cost.rounds;
          Session s(data, make_partition_spec(data.graph, std::vector<double>(I, 1.0), 0), sc);
          s.align();
          const auto batches = epoch_batches(s.split(SplitName::Train), sc.batch_size, streams::batches(sc.seed), 1);
          for (std::size_t r = 0; r < config.cost.rounds; ++r) s.train_round(batches[r % batches.size()]);
          const std::uint64_t sl = comm_cost_sl({&s.transcript()});
          const std::size_t fl_size = federated_model_size(data, sc);
          out.cost.push_back(
              {config.model, rs.name(), sc.secure, I, sc.batch_size, hidden, fl_size, s.rounds(), sl, comm_cost_fl(I, fl_size, s.rounds())});
        }
      break;
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::vector<std::string>> split_csv(std::string_view text, std::string_view header) {
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != header) throw ParseError("report", 1, "unexpected header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t p = 0;
    while (true) {
      std::size_t c = line.find(',', p);
      cells.emplace_back(line.substr(p, c == std::string_view::npos ? std::string_view::npos : c - p));
      if (c == std::string_view::npos) break;
      p = c + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <class T>
T parse_num(const std::string& s, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("report", line, "bad number '" + s + "'");
  return v;
}

constexpr std::string_view kMetricsHeader =
    "config_digest,model,strategy,participants,ratio,seed,epoch,train_loss,val_micro_f1,test_micro_f1";
constexpr std::string_view kCostHeader =
    "model,strategy,secure,participants,batch,hidden,model_size,rounds,sl_bytes,fl_bytes";

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string s(kMetricsHeader);
  s += '\n';
  for (const auto& r : rows)
    s += r.digest + ',' + r.model + ',' + r.strategy + ',' + std::to_string(r.participants) + ',' + r.ratio + ',' +
         std::to_string(r.seed) + ',' + std::to_string(r.epoch) + ',' + fmt(r.train_loss) + ',' + fmt(r.val_f1) + ',' +
         fmt(r.test_f1) + '\n';
  return s;
}

std::vector<MetricsRow> metrics_from_csv(std::string_view text) {
  std::vector<MetricsRow> out;
  std::size_t line = 1;
  for (const auto& c : split_csv(text, kMetricsHeader)) {
    ++line;
    if (c.size() != 10) throw ParseError("metrics.csv", line, "expected 10 columns");
    out.push_back({c[0], c[1], c[2], parse_num<std::size_t>(c[3], line), c[4], parse_num<std::uint64_t>(c[5], line),
                   parse_num<std::size_t>(c[6], line), parse_num<double>(c[7], line), parse_num<double>(c[8], line),
                   parse_num<double>(c[9], line)});
  }
  return out;
}

std::string cost_to_csv(const std::vector<CostRow>& rows) {
  std::string s(kCostHeader);
  s += '\n';
  for (const auto& r : rows)
    s += r.model + ',' + r.strategy + ',' + (r.secure ? "1" : "0") + ',' + std::to_string(r.participants) + ',' +
         std::to_string(r.batch) + ',' + std::to_string(r.hidden) + ',' + std::to_string(r.model_size) + ',' +
         std::to_string(r.rounds) + ',' + std::to_string(r.sl_bytes) + ',' + std::to_string(r.fl_bytes) + '\n';
  return s;
}

std::vector<CostRow> cost_from_csv(std::string_view text) {
  std::vector<CostRow> out;
  std::size_t line = 1;
  for (const auto& c : split_csv(text, kCostHeader)) {
    ++line;
    if (c.size() != 10) throw ParseError("cost.csv", line, "expected 10 columns");
    out.push_back({c[0], c[1], c[2] == "1", parse_num<std::size_t>(c[3], line), parse_num<std::size_t>(c[4], line),
                   parse_num<std::size_t>(c[5], line), parse_num<std::size_t>(c[6], line),
                   parse_num<std::size_t>(c[7], line), parse_num<std::uint64_t>(c[8], line),
                   parse_num<std::uint64_t>(c[9], line)});
  }
  return out;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& dir) {
  if (result.metrics.empty() && result.cost.empty()) throw ContractError("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (!result.metrics.empty()) write_file(dir / "metrics.csv", metrics_to_csv(result.metrics));
  if (!result.cost.empty()) write_file(dir / "cost.csv", cost_to_csv(result.cost));
  std::string timing = "config_digest,strategy,seed,epoch,seconds\n";
  for (const auto& t : result.timing)
    timing += t.digest + ',' + t.strategy + ',' + std::to_string(t.seed) + ',' + std::to_string(t.epoch) + ',' +
              fmt(t.seconds) + '\n';
  write_file(dir / "timing.csv", timing);
  std::string notes;
  for (const auto& n : result.notes) notes += n + '\n';
  write_file(dir / "notes.txt", notes);
}

}  // namespace vsplit
