// Acceptance run: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vsplit/core/gradcheck.hpp"
#include "vsplit/core/rng.hpp"
#include "vsplit/experiment/experiment.hpp"
#include "vsplit/graph/dataset_io.hpp"
#include "vsplit/models/hat.hpp"
#include "vsplit/privacy/audit.hpp"
#include "vsplit/privacy/psi.hpp"
#include "vsplit/privacy/secure_agg.hpp"
#include "vsplit/protocol/centralized.hpp"

using namespace vsplit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kRoot = VSPLIT_SOURCE_DIR;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %2d %s: %s (%s)\n", id, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

const DatasetBundle& fixture() {
  static const DatasetBundle b = load_dataset(kRoot / "data" / "fixture_small");
  return b;
}

SessionConfig fixture_session(ModelKind kind, Strategy s) {
  SessionConfig c;
  c.encoder.kind = kind;
  c.encoder.hidden = 6;
  c.strategy = s;
  c.batch_size = 4;
  c.seed = 13;
  c.optimizer.kind = OptimizerKind::Adam;
  c.optimizer.learning_rate = 0.01;
  return c;
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void criterion1() {
  const auto t0 = Clock::now();
  SessionConfig cfg = fixture_session(ModelKind::Hat, Strategy::Concat);
  Session split(fixture(), make_partition_spec(fixture().graph, {1.0}, 0), cfg);
  split.align();
  CentralizedModel central(fixture(), cfg);
  double worst = 0;
  std::size_t steps = 0;
  for (std::size_t e = 1; steps < 50; ++e)
    for (const auto& b : epoch_batches(fixture().train, cfg.batch_size, streams::batches(cfg.seed), e)) {
      if (steps == 50) break;
      worst = std::max(worst, std::abs(split.train_round(b) - central.train_round(b)));
      ++steps;
    }
  const double secs = seconds_since(t0);
  report(1, "split/centralized equivalence", worst <= 1e-9 && steps == 50 && secs < 10,
         "50 steps, max |loss diff| " + num(worst) + ", " + num(secs, 3) + " s");
}

void criterion2() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  std::size_t checked = 0;
  const auto spec = make_partition_spec(fixture().graph, {1.0, 1.0}, 0);
  for (ModelKind kind : {ModelKind::Gcn, ModelKind::Gat, ModelKind::Hat}) {
    SessionConfig cfg = fixture_session(kind, Strategy::Weighted);
    cfg.encoder.hidden = 4;
    cfg.encoder.heads = 2;
    Session s(fixture(), spec, cfg);
    s.align();
    for (auto* p : s.server_parameters())
      if (p->name.find("omega") != std::string::npos)
        for (std::size_t k = 0; k < p->value.size(); ++k) p->value[k] += 0.1 * static_cast<double>(k + 1);
    auto params = s.all_parameters();
    auto r = finite_diff_check([&] { return s.compute_gradients(fixture().train, 2); }, params);
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = to_string(kind) + ":" + r.worst_parameter;
    }
  }
  const double secs = seconds_since(t0);
  report(2, "gradient correctness", worst < 1e-4 && secs < 60,
         std::to_string(checked) + " elements incl. server, omega and output layer, worst rel-err " + num(worst) +
             " at " + where + ", " + num(secs, 3) + " s");
}

void criterion3() {
  std::mt19937_64 rng(33);
  double worst_sum = 0, worst_perm = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    std::vector<std::size_t> target;
    for (std::size_t i = 0; i < n; ++i) target.insert(target.end(), std::uniform_int_distribution<std::size_t>(1, 7)(rng), i);
    const std::size_t E = target.size();
    Tensor query = random_tensor({n, d}, rng, -3, 3), fused = random_tensor({E, d}, rng, -3, 3);
    std::vector<std::size_t> perm(E);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor fused_p(Shape{E, d});
    std::vector<std::size_t> target_p(E);
    for (std::size_t k = 0; k < E; ++k) {
      target_p[k] = target[perm[k]];
      std::copy(fused.row(perm[k]).begin(), fused.row(perm[k]).end(), fused_p.row(k).begin());
    }
    Tape t;
    const double lambda = 1.0 / std::sqrt(static_cast<double>(d));
    auto a = hat::node_attention(t, t.constant(query), t.constant(fused), target, n, lambda);
    auto b = hat::node_attention(t, t.constant(query), t.constant(fused_p), target_p, n, lambda);
    std::vector<double> sums(n, 0.0);
    for (std::size_t k = 0; k < E; ++k) sums[target[k]] += t.value(a.alpha)[k];
    for (double s : sums) worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    for (std::size_t k = 0; k < E; ++k)
      worst_perm = std::max(worst_perm, std::abs(t.value(b.alpha)[k] - t.value(a.alpha)[perm[k]]));
    for (std::size_t i = 0; i < n * d; ++i)
      worst_perm = std::max(worst_perm, std::abs(t.value(a.aggregate)[i] - t.value(b.aggregate)[i]));

    const std::size_t C = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    std::vector<Tensor> zs;
    for (std::size_t c = 0; c < C; ++c) zs.push_back(random_tensor({n, d}, rng, -2, 2));
    Var wp = t.constant(random_tensor({d, d}, rng)), bp = t.constant(random_tensor({d}, rng));
    Var q = t.constant(random_tensor({d}, rng));
    std::vector<std::size_t> cperm(C);
    std::iota(cperm.begin(), cperm.end(), 0);
    std::shuffle(cperm.begin(), cperm.end(), rng);
    std::vector<Var> za, zb;
    for (std::size_t c = 0; c < C; ++c) {
      za.push_back(t.constant(zs[c]));
      zb.push_back(t.constant(zs[cperm[c]]));
    }
    auto pa = hat::path_attention(t, za, wp, bp, q);
    auto pb = hat::path_attention(t, zb, wp, bp, q);
    double bsum = 0;
    for (std::size_t c = 0; c < C; ++c) {
      bsum += t.value(pa.beta)[c];
      worst_perm = std::max(worst_perm, std::abs(t.value(pb.beta)[c] - t.value(pa.beta)[cperm[c]]));
    }
    worst_sum = std::max(worst_sum, std::abs(bsum - 1.0));
    for (std::size_t i = 0; i < n * d; ++i) worst_perm = std::max(worst_perm, std::abs(t.value(pa.z)[i] - t.value(pb.z)[i]));
  }

  // The same weights inside a full encoder forward.
  EncoderConfig ec;
  ec.hidden = 5;
  ec.heads = 2;
  ParameterStore store;
  hat::HatEncoder enc(ec, make_schema(fixture().graph, fixture().metapaths), store, "acc/", 4);
  hat::Trace trace;
  enc.set_trace(&trace);
  GraphIndex index(fixture().graph);
  std::vector<std::size_t> targets(fixture().graph.node_count());
  std::iota(targets.begin(), targets.end(), 0);
  Subgraph sg = sample_subgraph(index, targets, fixture().metapaths, 2);
  Tape t;
  enc.forward(t, sg, fixture().graph, false, 0);
  for (Var beta : trace.beta) {
    double s = 0;
    for (double v : t.value(beta).values()) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  report(3, "attention normalisation", worst_sum <= 1e-12 && worst_perm <= 1e-12,
         "200 random cases + traced encoder, max |sum-1| " + num(worst_sum) + ", max permutation diff " +
             num(worst_perm));
}

void criterion4() {
  const auto t0 = Clock::now();
  const KeyPair key = keygen(512, 404);
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 4.0);
  double worst_ratio = 0;
  std::size_t trials = 0;
  for (std::size_t I : {2u, 4u, 8u})
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> parts;
      Tensor plain(Shape{8});
      for (std::size_t i = 0; i < I; ++i) {
        Tensor x(Shape{8});
        for (std::size_t k = 0; k < 8; ++k) plain[k] += (x[k] = g(rng));
        parts.push_back(x);
      }
      Tensor s = secure_sum(parts, key, derive_seed(7, {I, static_cast<std::uint64_t>(trial)}));
      const double tol = static_cast<double>(I) * std::ldexp(1.0, -24);
      for (std::size_t k = 0; k < 8; ++k) worst_ratio = std::max(worst_ratio, std::abs(s[k] - plain[k]) / tol);
      ++trials;
    }
  const double secs = seconds_since(t0);
  report(4, "secure aggregation", worst_ratio <= 1.0 && secs < 30,
         std::to_string(trials) + " trials over I in {2,4,8}, worst error " + num(worst_ratio) + " x I*2^-24, " +
             num(secs, 3) + " s");
}

void criterion5() {
  std::mt19937_64 rng(55);
  int mismatches = 0;
  std::size_t findings = 0, leaks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<std::string>> sets(3);
    std::vector<std::set<std::string>> all(3);
    const std::size_t universe = std::uniform_int_distribution<std::size_t>(50, 400)(rng);
    for (int p = 0; p < 3; ++p)
      for (std::size_t v = 0; v < universe; ++v)
        if (std::bernoulli_distribution(0.7)(rng)) {
          std::string id = "acct-" + std::to_string(v * 7919 % 100003);
          sets[p].push_back(id);
          all[p].insert(id);
        }
    std::vector<std::string> plain;
    for (const auto& id : all[0])
      if (all[1].contains(id) && all[2].contains(id)) plain.push_back(id);
    Transcript tr;
    auto r = psi_align(sets, make_psi_salt(static_cast<std::uint64_t>(trial)), &tr);
    auto got = r.aligned;
    std::sort(got.begin(), got.end());
    mismatches += got != plain;
    findings += transcript_audit(tr).findings.size();
    const std::string csv = tr.to_csv();
    for (const auto& s : all)
      for (const auto& id : s) leaks += csv.find(id) != std::string::npos;
  }
  report(5, "PSI", mismatches == 0 && findings == 0 && leaks == 0,
         "100 three-party instances, " + std::to_string(mismatches) + " mismatches, " + std::to_string(findings) +
             " audit findings, " + std::to_string(leaks) + " raw-id substrings");
}

// Benchmark runs shared by criteria 6-8 and 10. Ordering uses the final
// epoch; trends use each seed's test F1 averaged over the reporting epochs.
struct Bench {
  ExperimentConfig base;
  DatasetBundle data;
  // strategy label -> per-seed values
  std::map<std::string, std::vector<double>> final_f1, mean_f1;
  double table1_seconds = 0;

  void run(const std::string& label, ExperimentConfig c) {
    auto r = run_experiment(c, data);
    for (std::uint64_t seed : c.seeds) {
      double sum = 0, last = 0;
      std::size_t n = 0;
      for (const auto& m : r.metrics)
        if (m.seed == seed) sum += m.test_f1, last = m.test_f1, ++n;
      final_f1[label].push_back(last);
      mean_f1[label].push_back(sum / static_cast<double>(n));
    }
  }
};

Bench& bench() {
  static Bench b = [] {
    Bench b;
    b.base = load_experiment_config(kRoot / "configs" / "benchmark.json");
    b.data = load_experiment_data(b.base);
    return b;
  }();
  return b;
}

void criterion6() {
  Bench& b = bench();
  const auto t0 = Clock::now();
  for (std::string s : {"entire", "split_c"}) {
    ExperimentConfig c = b.base;
    c.strategy = s;
    b.run(s, c);
  }
  for (std::size_t i = 0; i < b.base.participants; ++i) {
    ExperimentConfig c = b.base;
    c.strategy = "standalone_" + std::to_string(i);
    b.run(c.strategy, c);
  }
  b.table1_seconds = seconds_since(t0);
  const std::size_t S = b.base.seeds.size();
  std::size_t ok = 0;
  std::string detail;
  for (std::size_t k = 0; k < S; ++k) {
    double standalone = 0;
    for (std::size_t i = 0; i < b.base.participants; ++i)
      standalone = std::max(standalone, b.final_f1["standalone_" + std::to_string(i)][k]);
    const double e = b.final_f1["entire"][k], c = b.final_f1["split_c"][k];
    ok += e >= c - 0.01 && c >= standalone - 0.01;
    detail += (k ? "; " : "") + num(e, 3) + "/" + num(c, 3) + "/" + num(standalone, 3);
  }
  report(6, "table-1 ordering", ok == S && b.table1_seconds < 300,
         std::to_string(ok) + "/" + std::to_string(S) + " seeds with entire>=split_c>=standalone (entire/split_c/best standalone: " +
             detail + "), " + num(b.table1_seconds, 3) + " s");
}

std::size_t seeds_monotone(const std::vector<std::vector<double>>& series, bool increasing) {
  std::size_t ok = 0;
  for (std::size_t k = 0; k < series.front().size(); ++k) {
    bool good = true;
    for (std::size_t j = 1; j < series.size(); ++j)
      good = good && (increasing ? series[j][k] >= series[j - 1][k] : series[j][k] <= series[j - 1][k]);
    ok += good;
  }
  return ok;
}

std::string means(const std::vector<std::vector<double>>& series) {
  std::string out;
  for (const auto& s : series) out += (out.empty() ? "" : " -> ") + num(std::accumulate(s.begin(), s.end(), 0.0) / s.size(), 4);
  return out;
}

void criterion7() {
  Bench& b = bench();
  std::vector<std::vector<double>> series{b.mean_f1["split_c"]};
  for (std::size_t I : {4u, 8u}) {
    ExperimentConfig c = b.base;
    c.strategy = "split_c";
    c.participants = I;
    c.ratio.clear();
    b.run("split_c_I" + std::to_string(I), c);
    series.push_back(b.mean_f1["split_c_I" + std::to_string(I)]);
  }
  const std::size_t ok = seeds_monotone(series, false), S = b.base.seeds.size();
  report(7, "table-2 trend", 5 * ok >= 4 * S,
         std::to_string(ok) + "/" + std::to_string(S) + " seeds non-increasing over I=2,4,8 (mean F1 " + means(series) + ")");
}

void criterion8() {
  Bench& b = bench();
  std::vector<std::vector<double>> series{b.mean_f1["split_c"]};
  for (auto ratio : {std::vector<double>{3, 7}, std::vector<double>{1, 9}}) {
    ExperimentConfig c = b.base;
    c.strategy = "split_c";
    c.participants = 2;
    c.ratio = ratio;
    const std::string label = "split_c_" + c.ratio_label();
    b.run(label, c);
    series.push_back(b.mean_f1[label]);
  }
  const std::size_t ok = seeds_monotone(series, true), S = b.base.seeds.size();
  report(8, "table-3 trend", 5 * ok >= 4 * S,
         std::to_string(ok) + "/" + std::to_string(S) + " seeds non-decreasing over 5:5, 3:7, 1:9 (mean F1 " +
             means(series) + ")");
}

void criterion9() {
  const auto t0 = Clock::now();
  Bench& b = bench();
  ExperimentConfig c = b.base;
  c.strategy = "split_m";
  auto r = run_grid(Grid::Cost, c, b.data);
  std::map<std::size_t, std::map<std::size_t, CostRow>> grid;  // hidden -> I -> row
  for (const auto& row : r.cost) grid[row.hidden][row.participants] = row;

  bool fl_linear = true, sl_grows = true, widens = true, crossover = false;
  std::size_t prev_count = 0;
  double prev_gap = -1e300;
  for (const auto& [hidden, by_i] : grid) {
    const CostRow& first = by_i.begin()->second;
    std::size_t count = 0;
    const CostRow* prev = nullptr;
    for (const auto& [I, row] : by_i) {
      fl_linear = fl_linear && row.fl_bytes * first.participants == first.fl_bytes * I;
      if (prev) {
        // Per-round embedding traffic is I*B*d up and down plus the fixed label path.
        sl_grows = sl_grows && row.sl_bytes > prev->sl_bytes &&
                   row.sl_bytes * prev->participants <= prev->sl_bytes * I * 2;
      }
      if (row.sl_bytes < row.fl_bytes) ++count;
      crossover = crossover || row.sl_bytes < row.fl_bytes;
      prev = &row;
    }
    const CostRow& last = by_i.rbegin()->second;
    const double gap = static_cast<double>(last.fl_bytes) - static_cast<double>(last.sl_bytes);
    widens = widens && count >= prev_count && gap > prev_gap;
    prev_count = count;
    prev_gap = gap;
  }
  const double secs = seconds_since(t0);
  report(9, "communication cost shape", fl_linear && sl_grows && crossover && widens && secs < 60,
         std::to_string(r.cost.size()) + " grid points; FL linear in I: " + (fl_linear ? "yes" : "no") +
             ", SL grows with I: " + (sl_grows ? "yes" : "no") + ", SL<FL region exists: " + (crossover ? "yes" : "no") +
             ", widens with |W|: " + (widens ? "yes" : "no") + ", " + num(secs, 3) + " s");
}

void criterion10() {
  Bench& b = bench();
  ExperimentConfig c = b.base;
  c.strategy = "split_m";
  b.run("split_m", c);
  const auto& cc = b.mean_f1["split_c"];
  const auto& mm = b.mean_f1["split_m"];
  const double mc = std::accumulate(cc.begin(), cc.end(), 0.0) / cc.size();
  const double mmean = std::accumulate(mm.begin(), mm.end(), 0.0) / mm.size();
  report(10, "concat vs average", mc >= mmean - 0.01,
         "epoch-mean micro-F1 split_c " + num(mc) + " vs split_m " + num(mmean) + " over " + std::to_string(cc.size()) + " seeds");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion11() {
  ExperimentConfig c = load_experiment_config(kRoot / "configs" / "fixture.json");
  const auto data = load_experiment_data(c);
  const fs::path a = fs::temp_directory_path() / "vsplit_accept_a", b = fs::temp_directory_path() / "vsplit_accept_b";
  bool same = true;
  std::size_t files = 0;
  for (Grid g : {Grid::Table1, Grid::Cost}) {
    fs::remove_all(a);
    fs::remove_all(b);
    emit_report(run_grid(g, c, data), a);
    emit_report(run_grid(g, c, data), b);
    for (const char* f : {"metrics.csv", "cost.csv"})
      if (fs::exists(a / f)) {
        same = same && fs::exists(b / f) && slurp(a / f) == slurp(b / f);
        ++files;
      }
  }
  report(11, "determinism", same && files >= 3,
         std::to_string(files) + " report files from table1 and cost grids rerun byte-identically");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::function<void()>> all{criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
                                               criterion7, criterion8, criterion9, criterion10, criterion11};
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (!only.empty() && !only.contains(static_cast<int>(k + 1))) continue;
    try {
      all[k]();
    } catch (const std::exception& e) {
      report(static_cast<int>(k + 1), "exception", false, e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
