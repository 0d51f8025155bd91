#pragma once

#include "vsplit/models/encoder.hpp"

namespace vsplit {

/// Relation-agnostic mean aggregation: h' = ELU(mean(h_N) W + b), with all
/// relations' edges merged and metapaths ignored.
class GcnEncoder final : public Encoder {
 public:
  GcnEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store, const std::string& prefix,
             std::uint64_t seed);
  Var forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) override;

 private:
  std::vector<Parameter*> w_, b_;
};

/// Single-relation graph attention over merged edges plus self-loops:
/// e_ij = LeakyReLU(a_dst . Wh_i + a_src . Wh_j), heads averaged, then ELU.
class GatEncoder final : public Encoder {
 public:
  GatEncoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store, const std::string& prefix,
             std::uint64_t seed);
  Var forward(Tape& t, const Subgraph& sg, const HetGraph& graph, bool training, std::uint64_t dropout_key) override;

  /// Attention weights of the last forward, one Var per (layer, head).
  const std::vector<Var>& last_alpha() const noexcept { return alpha_; }

 private:
  struct Head {
    Parameter *w, *a_src, *a_dst;
  };
  std::vector<std::vector<Head>> heads_;
  std::vector<Parameter*> b_;
  std::vector<Var> alpha_;
};

struct MergedEntries {
  std::vector<std::size_t> target;
  std::vector<std::size_t> neighbor;
};

/// Relation entries of targets < n_out from every non-metapath channel,
/// optionally followed by one self entry per target.
MergedEntries merged_entries(const Subgraph& sg, std::size_t n_out, bool self_loops);

}  // namespace vsplit
