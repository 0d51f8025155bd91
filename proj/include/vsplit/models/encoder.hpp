#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vsplit/core/autograd.hpp"
#include "vsplit/graph/hetgraph.hpp"
#include "vsplit/graph/sampling.hpp"

namespace vsplit {

enum class ModelKind { Hat, Gcn, Gat };
enum class FusionKind { Concat, Add, Linear };

ModelKind parse_model_kind(const std::string& s);
FusionKind parse_fusion(const std::string& s);
std::string to_string(ModelKind k);
std::string to_string(FusionKind k);

struct EncoderConfig {
  ModelKind kind = ModelKind::Hat;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 1;
  FusionKind fusion = FusionKind::Concat;
  double dropout = 0.0;
  /// Project concatenated heads back to `hidden` instead of summing them.
  bool concat_heads = false;
  /// Attention temperature; 0 selects 1/sqrt(hidden).
  double attention_scale = 0.0;
  /// GCN only: count the node itself in its neighbourhood mean.
  bool gcn_include_self = true;

  double lambda() const;
  void validate() const;
};

struct ChannelInfo {
  std::string name;
  std::size_t edge_dim = 0;
  bool metapath = false;
};

/// What an encoder needs to size its parameters. Channel order matches
/// sample_subgraph: relations by name, then metapaths.
struct EncoderSchema {
  std::vector<std::string> type_names;
  std::size_t feature_dim = 0;
  std::vector<ChannelInfo> channels;
};

EncoderSchema make_schema(const HetGraph& g, std::span<const Metapath> metapaths);

/// K-layer graph encoder over a sampled Subgraph. Parameters live in the
/// caller's store under `prefix`.
class Encoder {
 public:
  virtual ~Encoder() = default;

  /// Embeddings of the subgraph's targets in local (ascending id) order,
  /// shape [targets x hidden]. `graph` supplies the node features.
  virtual Var forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training,
                      std::uint64_t dropout_key) = 0;

  const EncoderConfig& config() const noexcept { return config_; }
  const std::vector<Parameter*>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

 protected:
  Encoder(EncoderConfig config, EncoderSchema schema, std::string prefix)
      : config_(config), schema_(std::move(schema)), prefix_(std::move(prefix)) {}

  Parameter& make_weight(ParameterStore& store, const std::string& name, Shape shape, std::uint64_t seed);
  Parameter& make_bias(ParameterStore& store, const std::string& name, std::size_t dim);
  std::size_t input_dim(std::size_t layer) const { return layer == 0 ? schema_.feature_dim : config_.hidden; }
  /// Dropout on a layer output, keyed per layer.
  Var layer_dropout(Tape& t, Var x, std::size_t layer, bool training, std::uint64_t key) const;

  EncoderConfig config_;
  EncoderSchema schema_;
  std::string prefix_;
  std::vector<Parameter*> params_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, const EncoderSchema& schema,
                                      ParameterStore& store, const std::string& prefix, std::uint64_t seed);

/// Node features of every subgraph node, in local order.
Tensor gather_features(const Subgraph& sg, const HetGraph& graph);

}  // namespace vsplit
