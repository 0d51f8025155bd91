#pragma once

#include <memory>
#include <span>
#include <vector>

#include "vsplit/protocol/session.hpp"

namespace vsplit {

/// The same encoder, dense layers and output layer trained on one graph by
/// one party. Parameter names and seed streams match a one-participant
/// concat Session, so the two produce the same losses step for step.
class CentralizedModel {
 public:
  /// `graph` defaults to the bundle's graph; standalone runs pass a
  /// participant's view (with labels attached).
  CentralizedModel(const DatasetBundle& bundle, SessionConfig config, const HetGraph* graph = nullptr);
  ~CentralizedModel();

  double train_round(std::span<const std::size_t> batch);
  EpochResult run_epoch();
  std::vector<EpochResult> train();
  double evaluate(SplitName split);
  double compute_gradients(std::span<const std::size_t> batch, std::size_t step);

  std::vector<Parameter*> parameters();
  /// Encoder, server dense layers and output layer; the federated model size.
  std::size_t model_size() const;
  std::size_t rounds() const noexcept { return rounds_; }

 private:
  Tensor logits(std::span<const std::size_t> batch, std::size_t step, bool training, Tape& t, Var& out);

  const DatasetBundle& bundle_;
  const HetGraph& graph_;
  SessionConfig config_;
  std::unique_ptr<GraphIndex> index_;
  ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<ServerNet> server_;
  std::unique_ptr<OutputLayer> output_;
  Optimizer opt_;
  std::size_t rounds_ = 0, epoch_ = 0;
};

}  // namespace vsplit
