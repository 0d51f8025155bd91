#include "vsplit/protocol/centralized.hpp"

#include <chrono>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"

namespace vsplit {

CentralizedModel::CentralizedModel(const DatasetBundle& bundle, SessionConfig config, const HetGraph* graph)
    : bundle_(bundle), graph_(graph ? *graph : bundle.graph), config_(std::move(config)), opt_(config_.optimizer) {
  config_.validate();
  if (!graph_.has_labels()) throw RoleError("centralized training needs labels");
  if (config_.batch_size > bundle_.train.size())
    throw ConfigError("batch size " + std::to_string(config_.batch_size) + " exceeds the " +
                      std::to_string(bundle_.train.size()) + " training nodes");
  index_ = std::make_unique<GraphIndex>(graph_);
  const std::uint64_t init = streams::init(config_.seed);
  const std::size_t d = config_.encoder.hidden;
  encoder_ = make_encoder(config_.encoder, make_schema(graph_, bundle_.metapaths), store_, participant_name(0) + "/enc/",
                          init);
  HeadConfig head{d, d, graph_.num_classes, config_.cut, config_.server_dropout};
  server_ = std::make_unique<ServerNet>(head, store_, init);
  output_ = std::make_unique<OutputLayer>(head, store_, init);
}

CentralizedModel::~CentralizedModel() = default;

Tensor CentralizedModel::logits(std::span<const std::size_t> batch, std::size_t step, bool training, Tape& t,
                                Var& out) {
  Subgraph sg = sample_subgraph(*index_, batch, bundle_.metapaths, config_.encoder.layers, config_.node_budget);
  Var h = encoder_->forward(t, sg, graph_, training, streams::encoder_dropout(config_.seed, step, 0));
  Var z = server_->forward(t, h, training, streams::server_dropout(config_.seed, step));
  out = output_->forward(t, z);
  return t.value(out);
}

double CentralizedModel::compute_gradients(std::span<const std::size_t> batch, std::size_t step) {
  Tape t;
  Var out;
  logits(batch, step, true, t, out);
  std::vector<std::size_t> labels;
  for (std::size_t v : batch) labels.push_back(graph_.label(v));
  Var loss = ops::cross_entropy(t, out, labels);
  store_.zero_grad();
  t.backward(loss);
  return t.value(loss).item();
}

double CentralizedModel::train_round(std::span<const std::size_t> batch) {
  const double loss = compute_gradients(batch, ++rounds_);
  auto params = parameters();
  opt_.step(params);
  return loss;
}

EpochResult CentralizedModel::run_epoch() {
  const auto t0 = std::chrono::steady_clock::now();
  EpochResult r;
  r.epoch = ++epoch_;
  for (const auto& b : epoch_batches(bundle_.train, config_.batch_size, streams::batches(config_.seed), r.epoch)) {
    if (config_.max_rounds && rounds_ >= config_.max_rounds) break;
    r.train_loss += train_round(b);
    ++r.rounds;
  }
  if (r.rounds) r.train_loss /= static_cast<double>(r.rounds);
  if (!bundle_.val.empty()) r.val_f1 = evaluate(SplitName::Val);
  if (!bundle_.test.empty()) r.test_f1 = evaluate(SplitName::Test);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<EpochResult> CentralizedModel::train() {
  std::vector<EpochResult> out;
  for (std::size_t e = 0; e < config_.epochs || (config_.max_rounds && rounds_ < config_.max_rounds); ++e) {
    out.push_back(run_epoch());
    if (config_.max_rounds && rounds_ >= config_.max_rounds) break;
  }
  return out;
}

double CentralizedModel::evaluate(SplitName s) {
  const auto& ids = s == SplitName::Train ? bundle_.train : s == SplitName::Val ? bundle_.val : bundle_.test;
  if (ids.empty()) throw DomainError("cannot evaluate an empty split");
  const std::size_t chunk = config_.eval_batch ? config_.eval_batch : config_.batch_size;
  std::vector<std::size_t> predicted, labels;
  for (std::size_t b = 0; b < ids.size(); b += chunk) {
    std::span<const std::size_t> batch(ids.data() + b, std::min(chunk, ids.size() - b));
    Tape t;
    Var out;
    auto p = argmax_rows(logits(batch, rounds_, false, t, out));
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  for (std::size_t v : ids) labels.push_back(graph_.label(v));
  return micro_f1(predicted, labels, graph_.num_classes);
}

std::vector<Parameter*> CentralizedModel::parameters() { return store_.all(); }

std::size_t CentralizedModel::model_size() const {
  std::size_t n = encoder_->parameter_count();
  for (auto* p : server_->parameters()) n += p->value.size();
  for (auto* p : output_->parameters()) n += p->value.size();
  return n;
}

}  // namespace vsplit
