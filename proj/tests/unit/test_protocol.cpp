#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "vsplit/core/errors.hpp"
#include "vsplit/core/gradcheck.hpp"
#include "vsplit/core/ops.hpp"
#include "vsplit/graph/dataset_io.hpp"
#include "vsplit/privacy/audit.hpp"
#include "vsplit/protocol/centralized.hpp"
#include "vsplit/protocol/session.hpp"

using namespace vsplit;
namespace fs = std::filesystem;

namespace {

const DatasetBundle& small() {
  static const DatasetBundle b = load_dataset(fs::path(VSPLIT_SOURCE_DIR) / "data" / "fixture_small");
  return b;
}

SessionConfig base_config(Strategy s, ModelKind kind = ModelKind::Hat) {
  SessionConfig c;
  c.strategy = s;
  c.encoder.kind = kind;
  c.encoder.hidden = 6;
  c.encoder.layers = 2;
  c.batch_size = 4;
  c.epochs = 2;
  c.seed = 13;
  c.optimizer.kind = OptimizerKind::Adam;
  c.optimizer.learning_rate = 0.01;
  return c;
}

PartitionSpec spec_for(std::size_t I) {
  std::vector<double> ratio(I, 1.0);
  return make_partition_spec(small().graph, ratio, 0);
}

}  // namespace

TEST_CASE("combine strategies: examples") {
  Tensor a = Tensor::matrix({{1, 3}}), b = Tensor::matrix({{3, 5}});
  CHECK(combine_average({a, b}) == Tensor::matrix({{2, 4}}));
  CHECK(combine_average({a}) == a);
  CHECK(combine_concat({Tensor::matrix({{1, 2}}), Tensor::matrix({{3}})}) == Tensor::matrix({{1, 2, 3}}));
  CHECK(combine_concat({a}) == a);
  std::vector<Tensor> half(2, Tensor(Shape{2}, 0.5));
  CHECK(combine_weighted({a, b}, half) == combine_average({a, b}));
  CHECK(combine_weighted({a, b}, {Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0)}) == a);
  try {
    combine_average({a, b, Tensor::matrix({{1, 2, 3}})});
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("participant 2") != std::string::npos);
  }
}

TEST_CASE("combine_average equals a scalar loop; concat permutes blocks") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Tensor> xs;
  for (int i = 0; i < 3; ++i) {
    Tensor t(Shape{4, 5});
    for (double& v : t.values()) v = g(rng);
    xs.push_back(t);
  }
  Tensor m = combine_average(xs);
  for (std::size_t k = 0; k < m.size(); ++k) CHECK(m[k] == doctest::Approx((xs[0][k] + xs[1][k] + xs[2][k]) / 3));
  Tensor c = combine_concat(xs), p = combine_concat({xs[2], xs[0], xs[1]});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(c.at(r, k) == p.at(r, 5 + k));
      CHECK(c.at(r, 10 + k) == p.at(r, k));
    }
}

TEST_CASE("backward_route: examples and conservation") {
  Tensor g = Tensor::matrix({{2, 4}});
  auto avg = backward_route(g, Strategy::Average, 2, {2, 2}, {});
  CHECK(avg[0] == Tensor::matrix({{1, 2}}));
  CHECK(avg[1] == Tensor::matrix({{1, 2}}));
  Tensor wide = Tensor::matrix({{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}});
  auto blocks = backward_route(wide, Strategy::Concat, 2, {2, 3}, {});
  CHECK(combine_concat(blocks) == wide);
  auto w = backward_route(g, Strategy::Weighted, 2, {2, 2}, {Tensor::vector({1, 0}), Tensor::vector({0.5, 2})});
  CHECK(w[0] == Tensor::matrix({{2, 0}}));
  CHECK(w[1] == Tensor::matrix({{1, 8}}));
}

TEST_CASE("micro-F1 examples and recount oracle") {
  std::vector<std::size_t> p{0, 1, 1}, y{0, 1, 2};
  CHECK(micro_f1(p, y, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(micro_f1(y, y, 3) == 1.0);
  CHECK_THROWS_AS(micro_f1(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 3), DomainError);

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> u(0, 3);
  std::vector<std::size_t> pr(200), lb(200);
  for (std::size_t i = 0; i < 200; ++i) pr[i] = u(rng), lb[i] = u(rng);
  std::size_t confusion[4][4] = {};
  for (std::size_t i = 0; i < 200; ++i) ++confusion[lb[i]][pr[i]];
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < 4; ++k) {
      if (c == k) tp += confusion[c][k];
      else {
        fn += confusion[c][k];
        fp += confusion[k][c];
      }
    }
  CHECK(micro_f1(pr, lb, 4) == doctest::Approx(2 * tp / (2 * tp + fp + fn)).epsilon(1e-15));
}

TEST_CASE("server network: zero weights give identical rows; dropout off is deterministic") {
  ParameterStore store;
  ServerNet net({3, 4, 2, Cut::Hidden, 0.3}, store, 1);
  for (auto* p : net.parameters()) p->value.fill(0.0);
  store.get("server/l1/b").value.fill(0.5);
  Tape t;
  Tensor x(Shape{5, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  Tensor out = t.value(net.forward(t, t.constant(x), false, 1));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(r, c) == 0.5);

  ParameterStore s2;
  ServerNet n2({3, 4, 2, Cut::Hidden, 0.3}, s2, 9);
  Tape a, b;
  CHECK(a.value(n2.forward(a, a.constant(x), false, 1)) == b.value(n2.forward(b, b.constant(x), false, 2)));
  Tape c;
  CHECK_THROWS_AS(n2.forward(c, c.constant(Tensor(Shape{2, 4})), false, 1), ProtocolError);
}

TEST_CASE("label holder loss: uniform and perfect logits") {
  Tape t;
  std::vector<std::size_t> y{0, 1, 2};
  Var l = ops::cross_entropy(t, t.input(Tensor(Shape{3, 3})), y);
  CHECK(t.value(l).item() == doctest::Approx(std::log(3.0)));
  Tape t2;
  Var logits = t2.input(Tensor::matrix({{60, 0, 0}, {0, 60, 0}, {0, 0, 60}}));
  Var l2 = ops::cross_entropy(t2, logits, y);
  t2.backward(l2);
  CHECK(t2.value(l2).item() < 1e-12);
  for (double g : t2.grad(logits).values()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("one-participant concat split equals the centralized model for 50 steps") {
  for (ModelKind kind : {ModelKind::Hat, ModelKind::Gcn, ModelKind::Gat}) {
    SessionConfig cfg = base_config(Strategy::Concat, kind);
    Session split(small(), spec_for(1), cfg);
    split.align();
    CentralizedModel central(small(), cfg);
    double worst = 0;
    std::size_t steps = 0;
    for (std::size_t e = 1; steps < 50; ++e)
      for (const auto& b : epoch_batches(small().train, cfg.batch_size, streams::batches(cfg.seed), e)) {
        if (steps == 50) break;
        worst = std::max(worst, std::abs(split.train_round(b) - central.train_round(b)));
        ++steps;
      }
    CHECK(worst <= 1e-9);
    CHECK(split.evaluate(SplitName::Test) == central.evaluate(SplitName::Test));
  }
}

TEST_CASE("end-to-end gradients through the split pipeline") {
  const auto& bundle = small();
  std::vector<std::size_t> batch = bundle.train;
  struct Case {
    ModelKind kind;
    Strategy strategy;
    Cut cut;
  };
  for (Case c : {Case{ModelKind::Hat, Strategy::Weighted, Cut::Hidden}, Case{ModelKind::Hat, Strategy::Concat, Cut::Logits},
                 Case{ModelKind::Gcn, Strategy::Average, Cut::Hidden}, Case{ModelKind::Gat, Strategy::Weighted, Cut::Hidden}}) {
    SessionConfig cfg = base_config(c.strategy, c.kind);
    cfg.cut = c.cut;
    cfg.encoder.hidden = 4;
    Session s(bundle, spec_for(2), cfg);
    s.align();
    // Move omega away from its symmetric start.
    for (auto* p : s.server_parameters())
      if (p->name.find("omega") != std::string::npos)
        for (std::size_t k = 0; k < p->value.size(); ++k) p->value[k] += 0.1 * static_cast<double>(k + 1);
    auto params = s.all_parameters();
    auto r = finite_diff_check([&] { return s.compute_gradients(batch, 3); }, params);
    INFO(to_string(c.kind), " ", to_string(c.strategy), " worst ", r.worst_parameter, "[", r.worst_index, "]");
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > 0);
  }
}

TEST_CASE("routed gradients reassemble the server-input gradient") {
  for (Strategy st : {Strategy::Concat, Strategy::Average}) {
    Session s(small(), spec_for(3), base_config(st));
    s.align();
    s.compute_gradients(s.split(SplitName::Train), 1);
    const Tensor& g = s.last_server_input_grad();
    const auto& routed = s.last_routed_grads();
    REQUIRE(routed.size() == 3);
    if (st == Strategy::Concat) {
      CHECK(combine_concat(routed) == g);
    } else {
      for (const auto& r : routed)
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(3 * r[k] == doctest::Approx(g[k]).epsilon(1e-15));
    }
  }
}

TEST_CASE("transcript accounting and determinism") {
  SessionConfig cfg = base_config(Strategy::Average);
  auto run = [&] {
    Session s(small(), spec_for(2), cfg);
    s.align();
    std::vector<double> losses;
    for (const auto& e : s.train()) losses.push_back(e.train_loss);
    return std::make_pair(losses, s.transcript());
  };
  auto [l1, t1] = run();
  auto [l2, t2] = run();
  CHECK(l1 == l2);
  CHECK(t1 == t2);

  const std::size_t I = 2, d = cfg.encoder.hidden;
  std::map<std::size_t, std::size_t> emb_bytes, rows;
  for (const auto& m : t1.messages())
    if (m.kind == "embedding") emb_bytes[m.round] += m.bytes;
  for (const auto& m : t1.messages())
    if (m.kind == "hidden") rows[m.round] = m.elements / d;
  REQUIRE(!emb_bytes.empty());
  for (auto [round, bytes] : emb_bytes) CHECK(bytes == I * rows[round] * d * 8);
  for (const auto& m : t1.messages()) {
    CHECK(m.kind != "label");
    CHECK(m.kind != "raw_id");
    CHECK(m.kind != "features");
  }
  auto report = transcript_audit(t1);
  CHECK(report.findings.size() == emb_bytes.size() * I);
}

TEST_CASE("secure sessions: clean audit, close to plaintext, larger transcript") {
  for (Strategy st : {Strategy::Average, Strategy::Weighted}) {
    SessionConfig cfg = base_config(st);
    cfg.epochs = 1;
    Session plain(small(), spec_for(2), cfg);
    plain.align();
    auto ep = plain.train();
    cfg.secure = true;
    Session sec(small(), spec_for(2), cfg);
    sec.align();
    auto es = sec.train();
    CHECK(std::abs(ep[0].train_loss - es[0].train_loss) < 1e-5);
    auto report = transcript_audit(sec.transcript());
    INFO(report.to_text());
    CHECK(report.clean());
    CHECK(report.notices.empty());
    CHECK(sec.transcript().total_bytes() > plain.transcript().total_bytes());
    CHECK(transcript_audit(sec.eval_transcript()).clean());
  }
  SessionConfig cfg = base_config(Strategy::Concat);
  cfg.epochs = 1;
  cfg.secure = true;
  Session sec(small(), spec_for(2), cfg);
  sec.train();
  auto report = transcript_audit(sec.transcript());
  CHECK(report.clean());
  CHECK(!report.notices.empty());
}

TEST_CASE("session preconditions and PSI subsets") {
  Session s(small(), spec_for(2), base_config(Strategy::Concat));
  CHECK_THROWS_AS(s.train_round(small().train), ProtocolError);
  CHECK_THROWS_AS(s.evaluate(SplitName::Test), ProtocolError);

  SessionConfig big = base_config(Strategy::Concat);
  big.batch_size = 500;
  Session b(small(), spec_for(2), big);
  CHECK_THROWS_AS(b.align(), ConfigError);

  SessionConfig cov = base_config(Strategy::Concat);
  cov.id_coverage = 0.8;
  cov.batch_size = 1;
  Session c(small(), spec_for(2), cov);
  c.align();
  CHECK(c.split(SplitName::Train).size() + c.split(SplitName::Val).size() + c.split(SplitName::Test).size() <
        small().train.size() + small().val.size() + small().test.size());
  std::size_t psi = 0;
  for (const auto& m : c.transcript().messages()) psi += m.kind == "psi";
  CHECK(psi == 4);

  auto views = vertical_partition(small(), spec_for(2), 1);
  CHECK_THROWS_AS(CentralizedModel(small(), base_config(Strategy::Concat), &views[1].graph), RoleError);
}
