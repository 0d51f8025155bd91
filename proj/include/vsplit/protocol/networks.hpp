#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vsplit/core/autograd.hpp"

namespace vsplit {

/// Where the model is cut between server and label holder.
///   Hidden: server in -> d -> d, label holder d -> |C|.
///   Logits: server in -> d -> |C|, label holder only computes the loss.
enum class Cut { Hidden, Logits };

Cut parse_cut(const std::string& s);
std::string to_string(Cut c);

struct HeadConfig {
  std::size_t input_dim = 0;
  std::size_t hidden = 64;
  std::size_t classes = 2;
  Cut cut = Cut::Hidden;
  double dropout = 0.3;
};

/// The server's dense layers. Parameters "server/l0/W", "server/l0/b", ...
class ServerNet {
 public:
  ServerNet(const HeadConfig& config, ParameterStore& store, std::uint64_t seed);

  Var forward(Tape& t, Var input, bool training, std::uint64_t dropout_key) const;
  std::size_t output_dim() const noexcept;
  const std::vector<Parameter*>& parameters() const noexcept { return params_; }

 private:
  HeadConfig config_;
  std::vector<Parameter*> params_;
};

/// Label holder's output layer "label/out/W", "label/out/b" (absent under Cut::Logits).
class OutputLayer {
 public:
  OutputLayer(const HeadConfig& config, ParameterStore& store, std::uint64_t seed);

  Var forward(Tape& t, Var hidden) const;
  const std::vector<Parameter*>& parameters() const noexcept { return params_; }

 private:
  std::vector<Parameter*> params_;
};

/// Micro-averaged F1 from pooled confusion counts. Throws DomainError on
/// empty input.
double micro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> labels, std::size_t classes);

std::vector<std::size_t> argmax_rows(const Tensor& logits);

}  // namespace vsplit
