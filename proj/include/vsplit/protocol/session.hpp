#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vsplit/core/optim.hpp"
#include "vsplit/graph/partition.hpp"
#include "vsplit/graph/sampling.hpp"
#include "vsplit/models/encoder.hpp"
#include "vsplit/privacy/paillier.hpp"
#include "vsplit/privacy/secure_agg.hpp"
#include "vsplit/protocol/combine.hpp"
#include "vsplit/protocol/networks.hpp"
#include "vsplit/protocol/transcript.hpp"

namespace vsplit {

struct SessionConfig {
  Strategy strategy = Strategy::Concat;
  Cut cut = Cut::Hidden;
  EncoderConfig encoder;  // encoder.hidden is the embedding width d
  double server_dropout = 0.3;
  std::size_t batch_size = 512;
  std::size_t epochs = 5;
  /// Stop after this many batch rounds in total; 0 runs every epoch in full.
  std::size_t max_rounds = 0;
  OptimizerConfig optimizer;
  bool secure = false;
  std::size_t key_bits = 512;
  unsigned scale_bits = 24;
  /// Fraction of node ids each participant brings to PSI.
  double id_coverage = 1.0;
  std::size_t node_budget = std::numeric_limits<std::size_t>::max();
  /// Evaluation chunk size; 0 uses batch_size.
  std::size_t eval_batch = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class SplitName { Train, Val, Test };

/// Shuffled without replacement, cut into chunks of `batch`, each chunk sorted.
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> ids, std::size_t batch,
                                                    std::uint64_t seed, std::size_t epoch);

/// Seed streams shared by the split session and the centralized model so
/// the two draw identical initial weights, batches and dropout masks.
namespace streams {
std::uint64_t init(std::uint64_t seed);
std::uint64_t encoder_dropout(std::uint64_t seed, std::size_t step, std::size_t participant);
std::uint64_t server_dropout(std::uint64_t seed, std::size_t step);
std::uint64_t batches(std::uint64_t seed);
std::uint64_t partition(std::uint64_t seed);
}  // namespace streams

struct EpochResult {
  std::size_t epoch = 0;
  std::size_t rounds = 0;  // batch rounds in this epoch
  double train_loss = 0;   // mean over the epoch's rounds
  double val_f1 = 0;
  double test_f1 = 0;
  double seconds = 0;
};

/// One tripartite split-learning session: I participants with local
/// encoders, a server holding the combination and dense layers, and the
/// label holder's output layer. Every cross-party value is logged.
class Session {
 public:
  Session(const DatasetBundle& bundle, const PartitionSpec& spec, SessionConfig config);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// PSI over the participants' ids. Train/val/test are then restricted to
  /// the intersection. Skipped (all ids aligned) when I = 1.
  void align();
  bool aligned() const noexcept { return aligned_; }

  /// One forward/backward/update over `batch` (global node ids, sorted).
  double train_round(std::span<const std::size_t> batch);
  EpochResult run_epoch();
  std::vector<EpochResult> train();
  double evaluate(SplitName split);

  /// Loss and gradients for `batch` with the dropout masks of round `step`,
  /// without updating parameters or logging messages.
  double compute_gradients(std::span<const std::size_t> batch, std::size_t step);
  /// Server-input gradient and per-participant routed gradients from the
  /// last compute_gradients or train_round.
  const Tensor& last_server_input_grad() const noexcept { return last_input_grad_; }
  const std::vector<Tensor>& last_routed_grads() const noexcept { return last_routed_; }

  const std::vector<std::size_t>& split(SplitName s) const;
  const Transcript& transcript() const noexcept { return transcript_; }
  const Transcript& eval_transcript() const noexcept { return eval_transcript_; }
  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t participants() const noexcept { return parts_.size(); }
  const SessionConfig& config() const noexcept { return config_; }

  std::vector<Parameter*> participant_parameters(std::size_t i) const;
  std::vector<Parameter*> server_parameters() const;  // dense layers and omega
  std::vector<Parameter*> label_parameters() const;
  std::vector<Parameter*> all_parameters() const;
  /// One participant's encoder plus the server layers and the output layer.
  std::size_t model_size() const;

 private:
  struct Participant;
  enum class Mode { Train, Grad, Eval };
  struct Pass {
    double loss = 0;
    Tensor logits;
  };

  Pass run(std::span<const std::size_t> batch, std::size_t step, Mode mode, Transcript* tr);
  std::vector<std::size_t> batch_labels(std::span<const std::size_t> batch) const;

  const DatasetBundle& bundle_;
  SessionConfig config_;
  std::size_t label_holder_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::unique_ptr<Participant>> parts_;
  ParameterStore server_store_, label_store_;
  std::unique_ptr<ServerNet> server_;
  std::unique_ptr<OutputLayer> output_;
  std::vector<Parameter*> omega_;
  Optimizer server_opt_, label_opt_;
  std::optional<KeyPair> key_;
  FixedPoint fp_;

  bool aligned_ = false;
  std::vector<std::size_t> train_, val_, test_;
  std::size_t rounds_ = 0, epoch_ = 0;
  Transcript transcript_, eval_transcript_;
  Tensor last_input_grad_;
  std::vector<Tensor> last_routed_;
};

}  // namespace vsplit
