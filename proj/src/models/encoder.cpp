#include "vsplit/models/encoder.hpp"

#include <cmath>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"
#include "vsplit/core/rng.hpp"
#include "vsplit/models/baselines.hpp"
#include "vsplit/models/hat.hpp"

namespace vsplit {

ModelKind parse_model_kind(const std::string& s) {
  if (s == "hat" || s == "HAT") return ModelKind::Hat;
  if (s == "gcn" || s == "GCN") return ModelKind::Gcn;
  if (s == "gat" || s == "GAT") return ModelKind::Gat;
  throw ConfigError("unknown model '" + s + "' (expected hat, gcn or gat)");
}

FusionKind parse_fusion(const std::string& s) {
  if (s == "concat") return FusionKind::Concat;
  if (s == "add") return FusionKind::Add;
  if (s == "linear") return FusionKind::Linear;
  throw ConfigError("unknown fusion '" + s + "' (expected concat, add or linear)");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Hat: return "hat";
    case ModelKind::Gcn: return "gcn";
    case ModelKind::Gat: return "gat";
  }
  return "?";
}

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::Concat: return "concat";
    case FusionKind::Add: return "add";
    case FusionKind::Linear: return "linear";
  }
  return "?";
}

double EncoderConfig::lambda() const {
  return attention_scale > 0.0 ? attention_scale : 1.0 / std::sqrt(static_cast<double>(hidden));
}

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder needs at least one layer");
  if (hidden < 1) throw ConfigError("hidden dimension must be positive");
  if (heads < 1) throw ConfigError("head count must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder dropout must lie in [0,1)");
  if (attention_scale < 0.0) throw ConfigError("attention_scale must be nonnegative");
}

EncoderSchema make_schema(const HetGraph& g, std::span<const Metapath> metapaths) {
  EncoderSchema s;
  s.type_names = g.type_names;
  s.feature_dim = g.feature_dim();
  for (const auto& [name, rel] : g.relations) s.channels.push_back({name, rel.edge_dim, false});
  for (const auto& mp : metapaths) s.channels.push_back({mp.name(), metapath_feature_dim(g, mp), true});
  return s;
}

std::size_t Encoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params_) n += p->value.size();
  return n;
}

Parameter& Encoder::make_weight(ParameterStore& store, const std::string& name, Shape shape, std::uint64_t seed) {
  auto& p = store.glorot(prefix_ + name, std::move(shape), seed);
  params_.push_back(&p);
  return p;
}

Parameter& Encoder::make_bias(ParameterStore& store, const std::string& name, std::size_t dim) {
  auto& p = store.zeros(prefix_ + name, Shape{dim});
  params_.push_back(&p);
  return p;
}

Var Encoder::layer_dropout(Tape& t, Var x, std::size_t layer, bool training, std::uint64_t key) const {
  return ops::dropout(t, x, config_.dropout, derive_seed(key, {layer}), training);
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, const EncoderSchema& schema, ParameterStore& store,
                                      const std::string& prefix, std::uint64_t seed) {
  config.validate();
  switch (config.kind) {
    case ModelKind::Hat: return std::make_unique<hat::HatEncoder>(config, schema, store, prefix, seed);
    case ModelKind::Gcn: return std::make_unique<GcnEncoder>(config, schema, store, prefix, seed);
    case ModelKind::Gat: return std::make_unique<GatEncoder>(config, schema, store, prefix, seed);
  }
  throw ConfigError("unknown model kind");
}

Tensor gather_features(const Subgraph& sg, const HetGraph& graph) {
  const std::size_t D = graph.feature_dim();
  Tensor x(Shape{sg.nodes.size(), D});
  for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
    auto src = graph.features.row(sg.nodes[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace vsplit
