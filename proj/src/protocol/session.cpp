#include "vsplit/protocol/session.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"
#include "vsplit/core/rng.hpp"
#include "vsplit/privacy/psi.hpp"

namespace vsplit {

namespace {

enum : std::uint64_t { kInit = 1, kEncDrop, kSrvDrop, kBatches, kPartition, kKey, kEncrypt, kCoverage, kPsi };

}  // namespace

namespace streams {
std::uint64_t init(std::uint64_t seed) { return derive_seed(seed, {kInit}); }
std::uint64_t encoder_dropout(std::uint64_t seed, std::size_t step, std::size_t participant) {
  return derive_seed(seed, {kEncDrop, step, participant});
}
std::uint64_t server_dropout(std::uint64_t seed, std::size_t step) { return derive_seed(seed, {kSrvDrop, step}); }
std::uint64_t batches(std::uint64_t seed) { return derive_seed(seed, {kBatches}); }
std::uint64_t partition(std::uint64_t seed) { return derive_seed(seed, {kPartition}); }
}  // namespace streams

void SessionConfig::validate() const {
  encoder.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0 && max_rounds == 0) throw ConfigError("epochs must be positive");
  if (server_dropout < 0 || server_dropout >= 1) throw ConfigError("server_dropout must be in [0, 1)");
  if (id_coverage <= 0 || id_coverage > 1) throw ConfigError("id_coverage must be in (0, 1]");
  if (scale_bits == 0 || scale_bits > 40) throw ConfigError("scale_bits must be in [1, 40]");
  if (optimizer.learning_rate <= 0) throw ConfigError("learning rate must be positive");
}

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> ids, std::size_t batch,
                                                    std::uint64_t seed, std::size_t epoch) {
  if (batch == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, {epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < order.size(); b += batch) {
    std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(b),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + batch)));
    std::sort(chunk.begin(), chunk.end());
    out.push_back(std::move(chunk));
  }
  return out;
}

struct Session::Participant {
  LocalView view;
  std::unique_ptr<GraphIndex> index;
  ParameterStore store;
  std::unique_ptr<Encoder> encoder;
  Optimizer opt;
  std::unique_ptr<Encryptor> encryptor;
};

Session::Session(const DatasetBundle& bundle, const PartitionSpec& spec, SessionConfig config)
    : bundle_(bundle), config_(std::move(config)), server_opt_(config_.optimizer), label_opt_(config_.optimizer) {
  config_.validate();
  bundle_.validate();
  if (!bundle_.graph.has_labels()) throw RoleError("the dataset carries no labels");
  label_holder_ = spec.label_holder;
  classes_ = bundle_.graph.num_classes;
  fp_.scale_bits = config_.scale_bits;

  auto views = vertical_partition(bundle_, spec, streams::partition(config_.seed));
  const std::uint64_t init = streams::init(config_.seed);
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto p = std::make_unique<Participant>();
    p->view = std::move(views[i]);
    p->index = std::make_unique<GraphIndex>(p->view.graph);
    p->encoder = make_encoder(config_.encoder, make_schema(p->view.graph, bundle_.metapaths), p->store, participant_name(i) + "/enc/", init);
    p->opt = Optimizer(config_.optimizer);
    parts_.push_back(std::move(p));
  }

  const std::size_t I = parts_.size(), d = config_.encoder.hidden;
  HeadConfig head{config_.strategy == Strategy::Concat ? I * d : d, d, classes_, config_.cut, config_.server_dropout};
  server_ = std::make_unique<ServerNet>(head, server_store_, init);
  output_ = std::make_unique<OutputLayer>(head, label_store_, init);
  if (config_.strategy == Strategy::Weighted)
    for (std::size_t i = 0; i < I; ++i)
      omega_.push_back(&server_store_.add("server/omega/" + std::to_string(i),
                                          Tensor(Shape{d}, 1.0 / static_cast<double>(I))));

  if (config_.secure) {
    key_ = keygen(config_.key_bits, derive_seed(config_.seed, {kKey}));
    for (std::size_t i = 0; i < I; ++i)
      parts_[i]->encryptor = std::make_unique<Encryptor>(key_->pub, derive_seed(config_.seed, {kEncrypt, i}));
  }
}

Session::~Session() = default;

void Session::align() {
  const auto& g = bundle_.graph;
  std::vector<std::size_t> common;
  if (parts_.size() == 1) {
    common.resize(g.node_count());
    for (std::size_t v = 0; v < common.size(); ++v) common[v] = v;
  } else {
    std::vector<std::vector<std::string>> sets(parts_.size());
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const auto& ids = parts_[i]->view.graph.external_ids;
      Rng rng(derive_seed(config_.seed, {kCoverage, i}));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (const auto& id : ids)
        if (u(rng) < config_.id_coverage) sets[i].push_back(id);
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t v = 0; v < g.node_count(); ++v) index.emplace(g.external_ids[v], v);
    auto result = psi_align(sets, make_psi_salt(derive_seed(config_.seed, {kPsi})), &transcript_, 0);
    for (const auto& id : result.aligned) common.push_back(index.at(id));
    std::sort(common.begin(), common.end());
  }

  auto restrict = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> out;
    for (std::size_t v : ids)
      if (std::binary_search(common.begin(), common.end(), v)) out.push_back(v);
    std::sort(out.begin(), out.end());
    return out;
  };
  train_ = restrict(bundle_.train);
  val_ = restrict(bundle_.val);
  test_ = restrict(bundle_.test);
  if (train_.empty()) throw ProtocolError("no training node survived alignment");
  if (config_.batch_size > train_.size())
    throw ConfigError("batch size " + std::to_string(config_.batch_size) + " exceeds the " +
                      std::to_string(train_.size()) + " aligned training nodes");
  aligned_ = true;
}

const std::vector<std::size_t>& Session::split(SplitName s) const {
  switch (s) {
    case SplitName::Train: return train_;
    case SplitName::Val: return val_;
    case SplitName::Test: return test_;
  }
  return train_;
}

std::vector<std::size_t> Session::batch_labels(std::span<const std::size_t> batch) const {
  const HetGraph& lg = parts_[label_holder_]->view.graph;
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (std::size_t v : batch) labels.push_back(lg.label(v));
  return labels;
}

Session::Pass Session::run(std::span<const std::size_t> batch, std::size_t step, Mode mode, Transcript* tr) {
  if (batch.empty()) throw ContractError("empty batch");
  const std::size_t I = parts_.size(), d = config_.encoder.hidden, B = batch.size();
  const bool training = mode != Mode::Eval;
  const std::string server = "server", decryptor = "decryptor";
  auto log = [&](Message m) {
    if (tr) tr->record(std::move(m));
  };
  auto log_plain = [&](const std::string& from, const std::string& to, std::string_view k, std::size_t n) {
    if (tr) tr->record_plain(step, from, to, k, n);
  };

  // Participants: local embeddings of the batch.
  std::vector<Tape> ptapes(I);
  std::vector<Var> h(I);
  std::vector<Tensor> hv(I);
  for (std::size_t i = 0; i < I; ++i) {
    auto& p = *parts_[i];
    Subgraph sg = sample_subgraph(*p.index, batch, bundle_.metapaths, config_.encoder.layers, config_.node_budget);
    h[i] = p.encoder->forward(ptapes[i], sg, p.view.graph, training,
                              streams::encoder_dropout(config_.seed, step, i));
    hv[i] = ptapes[i].value(h[i]);
  }

  // Server: combine.
  Tape ts;
  std::vector<Var> xin(I), omega;
  for (auto* w : omega_) omega.push_back(ts.param(*w));
  Var agg, agg_leaf;
  std::vector<EncryptedTensor> cipher;
  const bool he_sum_path = config_.secure && config_.strategy != Strategy::Concat;
  if (!config_.secure) {
    for (std::size_t i = 0; i < I; ++i) {
      log_plain(participant_name(i), server, kind::embedding, B * d);
      xin[i] = ts.input(hv[i]);
    }
    agg = combine(ts, config_.strategy, xin, omega);
  } else if (!he_sum_path) {
    // Concat has no aggregate: each block is decrypted on its own.
    for (std::size_t i = 0; i < I; ++i) {
      auto c = encrypt_tensor(hv[i], *parts_[i]->encryptor, fp_, 1);
      log({step, participant_name(i), decryptor, std::string(kind::ciphertext), c.size(), c.wire_bytes(), true});
      log_plain(decryptor, server, kind::decrypt, c.size());
      xin[i] = ts.input(decrypt_tensor(*key_, c, fp_));
    }
    agg = combine(ts, config_.strategy, xin, omega);
  } else {
    std::vector<EncryptedTensor> to_sum;
    for (std::size_t i = 0; i < I; ++i) {
      cipher.push_back(encrypt_tensor(hv[i], *parts_[i]->encryptor, fp_, I));
      log({step, participant_name(i), server, std::string(kind::ciphertext), cipher[i].size(),
           cipher[i].wire_bytes(), true});
      if (config_.strategy == Strategy::Weighted)
        to_sum.push_back(he_scale_cols(key_->pub, cipher[i], omega_[i]->value, fp_));
    }
    std::vector<const EncryptedTensor*> ptrs;
    for (const auto& c : (config_.strategy == Strategy::Weighted ? to_sum : cipher)) ptrs.push_back(&c);
    EncryptedTensor sum = he_sum(key_->pub, ptrs);
    log({step, server, decryptor, std::string(kind::ciphertext), sum.size(), sum.wire_bytes(), true});
    log_plain(decryptor, server, kind::decrypt, sum.size());
    agg_leaf = ts.input(decrypt_tensor(*key_, sum, fp_));
    agg = config_.strategy == Strategy::Average && I > 1 ? ops::scale(ts, agg_leaf, 1.0 / static_cast<double>(I))
                                                         : agg_leaf;
  }

  Var out = server_->forward(ts, agg, training, streams::server_dropout(config_.seed, step));
  const Tensor out_v = ts.value(out);
  const std::string label_party = participant_name(label_holder_);
  log_plain(server, label_party, kind::hidden, out_v.size());

  // Label holder.
  Tape tl;
  Var hin = tl.input(out_v);
  Var logits = output_->forward(tl, hin);
  Pass pass;
  pass.logits = tl.value(logits);
  if (mode == Mode::Eval) return pass;

  const auto labels = batch_labels(batch);
  Var loss = ops::cross_entropy(tl, logits, labels);
  pass.loss = tl.value(loss).item();

  for (auto& p : parts_) p->store.zero_grad();
  server_store_.zero_grad();
  label_store_.zero_grad();

  tl.backward(loss);
  const Tensor g_out = tl.grad(hin);
  log_plain(label_party, server, kind::gradient, g_out.size());

  // Server backward and routing.
  ts.backward(out, g_out);
  last_input_grad_ = ts.grad(agg);
  std::vector<std::size_t> dims(I, d);
  std::vector<Tensor> omega_v;
  for (auto* w : omega_) omega_v.push_back(w->value);
  if (he_sum_path) {
    last_routed_ = backward_route(last_input_grad_, config_.strategy, I, dims, omega_v);
    if (config_.strategy == Strategy::Weighted)
      for (std::size_t i = 0; i < I; ++i) {
        // d loss / d omega_i = column sums of g (.) h_i, formed under encryption.
        auto enc_grad = he_weighted_colsum(key_->pub, cipher[i], last_input_grad_, fp_);
        log({step, server, decryptor, std::string(kind::ciphertext), enc_grad.size(), enc_grad.wire_bytes(), true});
        log_plain(decryptor, server, kind::decrypt, enc_grad.size());
        Tensor gw = decrypt_tensor(*key_, enc_grad, fp_);
        auto dst = omega_[i]->grad.values();
        for (std::size_t k = 0; k < d; ++k) dst[k] += gw[k];
      }
  } else {
    last_routed_.clear();
    for (std::size_t i = 0; i < I; ++i) last_routed_.push_back(ts.grad(xin[i]));
  }

  for (std::size_t i = 0; i < I; ++i) {
    log_plain(server, participant_name(i), kind::gradient, last_routed_[i].size());
    ptapes[i].backward(h[i], last_routed_[i]);
  }

  if (mode == Mode::Train) {
    for (auto& p : parts_) p->opt.step(p->encoder->parameters());
    server_opt_.step(server_parameters());
    label_opt_.step(label_parameters());
  }
  return pass;
}

double Session::train_round(std::span<const std::size_t> batch) {
  if (!aligned_) throw ProtocolError("train_round called before PSI alignment");
  return run(batch, ++rounds_, Mode::Train, &transcript_).loss;
}

double Session::compute_gradients(std::span<const std::size_t> batch, std::size_t step) {
  return run(batch, step, Mode::Grad, nullptr).loss;
}

EpochResult Session::run_epoch() {
  if (!aligned_) throw ProtocolError("run_epoch called before PSI alignment");
  const auto t0 = std::chrono::steady_clock::now();
  EpochResult r;
  r.epoch = ++epoch_;
  for (const auto& b : epoch_batches(train_, config_.batch_size, streams::batches(config_.seed), r.epoch)) {
    if (config_.max_rounds && rounds_ >= config_.max_rounds) break;
    r.train_loss += train_round(b);
    ++r.rounds;
  }
  if (r.rounds) r.train_loss /= static_cast<double>(r.rounds);
  if (!val_.empty()) r.val_f1 = evaluate(SplitName::Val);
  if (!test_.empty()) r.test_f1 = evaluate(SplitName::Test);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<EpochResult> Session::train() {
  if (!aligned_) align();
  std::vector<EpochResult> out;
  for (std::size_t e = 0; e < config_.epochs || (config_.max_rounds && rounds_ < config_.max_rounds); ++e) {
    out.push_back(run_epoch());
    if (config_.max_rounds && rounds_ >= config_.max_rounds) break;
  }
  return out;
}

double Session::evaluate(SplitName s) {
  if (!aligned_) throw ProtocolError("evaluate called before PSI alignment");
  const auto& ids = split(s);
  if (ids.empty()) throw DomainError("cannot evaluate an empty split");
  const std::size_t chunk = config_.eval_batch ? config_.eval_batch : config_.batch_size;
  std::vector<std::size_t> predicted;
  for (std::size_t b = 0; b < ids.size(); b += chunk) {
    std::span<const std::size_t> batch(ids.data() + b, std::min(chunk, ids.size() - b));
    auto pass = run(batch, rounds_, Mode::Eval, &eval_transcript_);
    auto p = argmax_rows(pass.logits);
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  return micro_f1(predicted, batch_labels(ids), classes_);
}

std::vector<Parameter*> Session::participant_parameters(std::size_t i) const {
  return parts_.at(i)->encoder->parameters();
}

std::vector<Parameter*> Session::server_parameters() const {
  auto out = server_->parameters();
  out.insert(out.end(), omega_.begin(), omega_.end());
  return out;
}

std::vector<Parameter*> Session::label_parameters() const { return output_->parameters(); }

std::vector<Parameter*> Session::all_parameters() const {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    auto p = participant_parameters(i);
    out.insert(out.end(), p.begin(), p.end());
  }
  for (auto* p : server_parameters()) out.push_back(p);
  for (auto* p : label_parameters()) out.push_back(p);
  return out;
}

std::size_t Session::model_size() const {
  std::size_t n = parts_.front()->encoder->parameter_count();
  for (auto* p : server_->parameters()) n += p->value.size();
  for (auto* p : output_->parameters()) n += p->value.size();
  return n;
}

}  // namespace vsplit
