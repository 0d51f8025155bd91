#pragma once

#include <string>
#include <vector>

#include "vsplit/core/autograd.hpp"

namespace vsplit {

enum class Strategy { Average, Concat, Weighted };

Strategy parse_strategy(const std::string& s);
std::string to_string(Strategy s);

/// Element-wise mean. Throws ProtocolError naming the first participant
/// whose shape differs from participant 0.
Tensor combine_average(const std::vector<Tensor>& locals);
/// Row-wise concatenation in participant order.
Tensor combine_concat(const std::vector<Tensor>& locals);
/// sum_i omega_i (.) locals_i, omega_i broadcast over rows.
Tensor combine_weighted(const std::vector<Tensor>& locals, const std::vector<Tensor>& omega);

/// Tape versions of the three strategies; `omega` is only read for Weighted.
Var combine(Tape& t, Strategy s, const std::vector<Var>& locals, const std::vector<Var>& omega);

/// Per-participant share of the gradient at the server input:
/// average g / I, concat the i-th column block of width `dims[i]`, weighted omega_i (.) g.
std::vector<Tensor> backward_route(const Tensor& g, Strategy s, std::size_t participants,
                                   const std::vector<std::size_t>& dims, const std::vector<Tensor>& omega);

}  // namespace vsplit
