#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vsplit/core/errors.hpp"
#include "vsplit/experiment/experiment.hpp"
#include "vsplit/graph/dataset_io.hpp"
#include "vsplit/graph/synthetic.hpp"
#include "vsplit/privacy/audit.hpp"

namespace fs = std::filesystem;
using namespace vsplit;

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kFindings = 3 };

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "' in --seeds");
    }
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::string& seeds, bool secure,
            const std::string& grid) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
  if (secure) cfg.session.secure = true;
  cfg.validate();
  const DatasetBundle data = load_experiment_data(cfg);

  ExperimentResult result = grid.empty() ? run_experiment(cfg, data) : run_grid(parse_grid(grid), cfg, data);
  const fs::path out = out_dir;
  emit_report(result, out);
  if (grid.empty() && !result.transcripts.empty()) {
    fs::create_directories(out / "transcripts");
    for (const auto& [name, t] : result.transcripts) t.write_csv(out / "transcripts" / (name + ".csv"));
  }
  for (const auto& n : result.notes) std::cerr << "note: " << n << "\n";
  std::cout << "wrote " << result.metrics.size() << " metric rows and " << result.cost.size() << " cost rows to "
            << out.string() << "\n";
  return kOk;
}

int cmd_audit(const std::string& path) {
  const AuditReport report = transcript_audit(Transcript::read_csv(path));
  std::cout << report.to_text();
  return report.clean() ? kOk : kFindings;
}

int cmd_gen(const std::string& spec_path, const std::string& out_dir) {
  std::ifstream in(spec_path);
  if (!in) throw ConfigError("cannot read " + spec_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const DatasetBundle bundle = generate_synthetic(parse_synthetic_spec(ss.str()));
  write_dataset(bundle, out_dir);
  std::cout << "wrote " << bundle.graph.node_count() << " nodes and " << bundle.graph.edge_count() << " edges to "
            << out_dir << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-learning simulator for heterogeneous graph neural networks"};
  app.require_subcommand(1);

  std::string config, out = "out", seeds, grid, transcript, spec, gen_out;
  bool secure = false;

  auto* run = app.add_subcommand("run", "Run an experiment or a grid and write CSV reports");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seeds", seeds, "Comma-separated seeds, overriding the config");
  run->add_flag("--secure", secure, "Route embeddings through homomorphic encryption");
  run->add_option("--grid", grid, "table1, table2, table3 or cost");

  auto* audit = app.add_subcommand("audit", "Check a transcript for privacy findings");
  audit->add_option("--transcript", transcript, "Transcript CSV")->required();

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic dataset");
  gen->add_option("--spec", spec, "Synthetic spec (JSON)")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(config, out, seeds, secure, grid);
    if (*audit) return cmd_audit(transcript);
    if (*gen) return cmd_gen(spec, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
