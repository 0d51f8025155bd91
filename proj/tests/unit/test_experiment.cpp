#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "vsplit/core/errors.hpp"
#include "vsplit/experiment/experiment.hpp"
#include "vsplit/graph/dataset_io.hpp"

using namespace vsplit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(VSPLIT_SOURCE_DIR) / "data";

ExperimentConfig fixture_config(const std::string& strategy) {
  ExperimentConfig c = parse_experiment_config(R"({
    "dataset": "fixture_small",
    "participants": 2,
    "model": "hat",
    "strategy": "split_c",
    "seeds": [3],
    "session": {"batch_size": 4, "hidden": 6, "epochs": 3, "optimizer": "adam", "learning_rate": 0.02}
  })",
                                               kData);
  c.strategy = strategy;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("FL cost model") {
  CHECK(comm_cost_fl(1, 1, 1) == 16);
  CHECK(comm_cost_fl(4, 1000, 5) == 2 * comm_cost_fl(2, 1000, 5));
  CHECK(comm_cost_fl(8, 1000000, 5) == 640000000ULL);
}

TEST_CASE("strategy names") {
  for (const char* s : {"entire", "standalone_0", "standalone_3", "split_m", "split_c", "split_w"})
    CHECK(RunStrategy::parse(s).name() == s);
  CHECK_THROWS_AS(RunStrategy::parse("standalone_"), ConfigError);
  CHECK_THROWS_AS(RunStrategy::parse("split_x"), ConfigError);
}

TEST_CASE("config parsing and validation") {
  CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": "x", "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"participants": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": "x", "participants": 2, "ratio": [1]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": "x", "ratio": [1, -1]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": "x", "strategy": "split_q"})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": "x", "session": {"hiden": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{"), ConfigError);

  auto c = fixture_config("split_c");
  CHECK(c.dataset == kData / "fixture_small");
  CHECK(c.session.batch_size == 4);
  CHECK(c.ratio_label() == "1:1");
  auto back = parse_experiment_config(experiment_config_to_json(c));
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(c));

  auto other = c;
  other.seeds = {1, 2, 3};
  CHECK(config_digest(other) == config_digest(c));
  other.session.encoder.hidden = 7;
  CHECK(config_digest(other) != config_digest(c));
}

TEST_CASE("entire beats the majority-class baseline on the fixture") {
  auto c = fixture_config("entire");
  c.session.epochs = 20;
  const auto data = load_experiment_data(c);
  auto r = run_experiment(c, data);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t v : data.test) ++counts[data.graph.label(v)];
  std::size_t majority = 0;
  for (auto [cls, n] : counts) majority = std::max(majority, n);
  const double baseline = static_cast<double>(majority) / static_cast<double>(data.test.size());
  CHECK(r.metrics.back().test_f1 > baseline);
}

TEST_CASE("split_c with one participant reproduces entire") {
  auto c = fixture_config("entire");
  c.participants = 1;
  const auto data = load_experiment_data(c);
  auto entire = run_experiment(c, data);
  c.strategy = "split_c";
  auto split = run_experiment(c, data);
  REQUIRE(entire.metrics.size() == split.metrics.size());
  for (std::size_t i = 0; i < entire.metrics.size(); ++i) {
    CHECK(std::abs(entire.metrics[i].train_loss - split.metrics[i].train_loss) <= 1e-9);
    CHECK(entire.metrics[i].test_f1 == split.metrics[i].test_f1);
  }
}

TEST_CASE("seeds produce separate row groups with one digest") {
  auto c = fixture_config("split_m");
  c.seeds = {1, 2};
  const auto data = load_experiment_data(c);
  auto r = run_experiment(c, data);
  REQUIRE(r.metrics.size() == 2 * c.session.epochs);
  CHECK(r.metrics.front().seed == 1);
  CHECK(r.metrics.back().seed == 2);
  CHECK(r.metrics.front().digest == r.metrics.back().digest);
  REQUIRE(r.cost.size() == 2);
  CHECK(r.cost[0].fl_bytes == comm_cost_fl(2, r.cost[0].model_size, r.cost[0].rounds));
  CHECK(r.transcripts.size() == 2);
  CHECK(r.cost[0].sl_bytes == r.transcripts[0].second.total_bytes());
}

TEST_CASE("standalone runs: concession note, bad participant") {
  auto c = fixture_config("standalone_1");
  const auto data = load_experiment_data(c);
  auto r = run_experiment(c, data);
  CHECK(r.notes.size() == 1);
  CHECK(run_experiment(fixture_config("standalone_0"), data).notes.empty());
  CHECK_THROWS_AS(run_experiment(fixture_config("standalone_2"), data), ConfigError);
}

TEST_CASE("reports: format, idempotence, round trip") {
  auto c = fixture_config("split_w");
  const auto data = load_experiment_data(c);
  auto r = run_experiment(c, data);
  const fs::path dir = fs::temp_directory_path() / "vsplit_report_test";
  fs::remove_all(dir);
  emit_report(r, dir);
  const std::string m1 = slurp(dir / "metrics.csv"), c1 = slurp(dir / "cost.csv");
  emit_report(run_experiment(c, data), dir);
  CHECK(slurp(dir / "metrics.csv") == m1);
  CHECK(slurp(dir / "cost.csv") == c1);
  CHECK(metrics_from_csv(m1) == r.metrics);
  CHECK(cost_from_csv(c1) == r.cost);

  ExperimentResult one;
  one.metrics.push_back(r.metrics.front());
  const std::string single = metrics_to_csv(one.metrics);
  CHECK(std::count(single.begin(), single.end(), '\n') == 2);
  CHECK_THROWS_AS(metrics_from_csv("nope\n"), ParseError);
  CHECK_THROWS_AS(emit_report(r, "/proc/forbidden/dir"), IoError);
}

TEST_CASE("secure mode costs more than plaintext") {
  auto c = fixture_config("split_m");
  c.session.epochs = 1;
  const auto data = load_experiment_data(c);
  auto plain = run_experiment(c, data);
  c.session.secure = true;
  auto sec = run_experiment(c, data);
  CHECK(sec.cost[0].sl_bytes > plain.cost[0].sl_bytes);
}
