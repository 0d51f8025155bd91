#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/graph/synthetic.hpp"
#include "vsplit/protocol/session.hpp"

namespace vsplit {

/// entire, standalone_<i>, split_m (average), split_c (concat), split_w (weighted).
struct RunStrategy {
  enum class Kind { Entire, Standalone, Split } kind = Kind::Split;
  std::size_t participant = 0;  // standalone only
  Strategy combine = Strategy::Concat;

  static RunStrategy parse(const std::string& s);
  std::string name() const;
};

struct CostGrid {
  std::vector<std::size_t> participants{2, 4, 8, 16};
  std::vector<std::size_t> hidden{8, 16, 32, 64};
  std::size_t rounds = 1;
};

struct ExperimentConfig {
  std::filesystem::path dataset;           // directory of TSV files, or
  std::optional<SyntheticSpec> synthetic;  // generated in memory
  std::size_t participants = 2;
  std::vector<double> ratio;  // empty: equal shares
  std::size_t label_holder = 0;
  std::string model = "hat";
  std::string strategy = "split_c";
  std::vector<std::uint64_t> seeds{1};
  SessionConfig session;
  CostGrid cost;

  void validate() const;
  /// Effective ratio (equal shares when none was given).
  std::vector<double> shares() const;
  std::string ratio_label() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& config);
/// FNV-1a of the canonical JSON with the seed list removed, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

DatasetBundle load_experiment_data(const ExperimentConfig& config);

struct MetricsRow {
  std::string digest;
  std::string model;
  std::string strategy;
  std::size_t participants = 0;
  std::string ratio;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_f1 = 0;
  double test_f1 = 0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct CostRow {
  std::string model;
  std::string strategy;
  bool secure = false;
  std::size_t participants = 0;
  std::size_t batch = 0;
  std::size_t hidden = 0;
  std::size_t model_size = 0;  // |W|
  std::size_t rounds = 0;
  std::uint64_t sl_bytes = 0;  // measured
  std::uint64_t fl_bytes = 0;  // modeled
  friend bool operator==(const CostRow&, const CostRow&) = default;
};

struct TimingRow {
  std::string digest;
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double seconds = 0;
};

struct ExperimentResult {
  std::vector<MetricsRow> metrics;
  std::vector<CostRow> cost;
  std::vector<TimingRow> timing;
  std::vector<std::string> notes;
  /// Training transcripts of split runs, keyed "<strategy>_seed<k>".
  std::vector<std::pair<std::string, Transcript>> transcripts;

  void append(ExperimentResult other);
};

/// rounds * 2 * I * |W| * 8.
std::uint64_t comm_cost_fl(std::size_t participants, std::size_t model_size, std::size_t rounds);
/// Sum of message bytes over the transcripts.
std::uint64_t comm_cost_sl(const std::vector<const Transcript*>& transcripts);

/// Every seed of config.strategy on `data`.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetBundle& data);

enum class Grid { Table1, Table2, Table3, Cost };
Grid parse_grid(const std::string& s);

/// Table1: entire, every standalone_i and the three split strategies.
/// Table2: split_c for I in {2, 4, 8}. Table3: split_c for ratios 5:5, 3:7, 1:9.
/// Cost: short split runs over cost.participants x cost.hidden.
ExperimentResult run_grid(Grid grid, const ExperimentConfig& config, const DatasetBundle& data);

/// metrics.csv, cost.csv (when non-empty), timing.csv and notes.txt.
/// metrics.csv and cost.csv depend only on config and seeds.
void emit_report(const ExperimentResult& result, const std::filesystem::path& dir);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(std::string_view text);
std::string cost_to_csv(const std::vector<CostRow>& rows);
std::vector<CostRow> cost_from_csv(std::string_view text);

}  // namespace vsplit
