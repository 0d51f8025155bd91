#include "vsplit/protocol/combine.hpp"

#include "vsplit/core/errors.hpp"
#include "vsplit/core/ops.hpp"

namespace vsplit {

Strategy parse_strategy(const std::string& s) {
  if (s == "average") return Strategy::Average;
  if (s == "concat") return Strategy::Concat;
  if (s == "weighted") return Strategy::Weighted;
  throw ConfigError("unknown combination strategy '" + s + "' (expected average, concat or weighted)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Average: return "average";
    case Strategy::Concat: return "concat";
    case Strategy::Weighted: return "weighted";
  }
  return "?";
}

namespace {

void check_locals(const std::vector<Tensor>& locals, bool rows_only) {
  if (locals.empty()) throw ProtocolError("no participant embeddings to combine");
  for (std::size_t i = 0; i < locals.size(); ++i) {
    require_rank(locals[i], 2, "combine");
    const bool ok = rows_only ? locals[i].rows() == locals[0].rows() : locals[i].shape() == locals[0].shape();
    if (!ok)
      throw ProtocolError("participant " + std::to_string(i) + " sent " + shape_string(locals[i].shape()) +
                          ", participant 0 sent " + shape_string(locals[0].shape()));
  }
}

}  // namespace

Tensor combine_average(const std::vector<Tensor>& locals) {
  check_locals(locals, false);
  Tensor out(locals[0].shape());
  for (const auto& l : locals)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += l[k];
  const double inv = 1.0 / static_cast<double>(locals.size());
  for (double& v : out.values()) v *= inv;
  return out;
}

Tensor combine_concat(const std::vector<Tensor>& locals) {
  check_locals(locals, true);
  std::size_t width = 0;
  for (const auto& l : locals) width += l.cols();
  const std::size_t n = locals[0].rows();
  Tensor out(Shape{n, width});
  std::size_t off = 0;
  for (const auto& l : locals) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < l.cols(); ++c) out.at(r, off + c) = l.at(r, c);
    off += l.cols();
  }
  return out;
}

Tensor combine_weighted(const std::vector<Tensor>& locals, const std::vector<Tensor>& omega) {
  check_locals(locals, false);
  if (omega.size() != locals.size())
    throw ProtocolError(std::to_string(omega.size()) + " weight vectors for " + std::to_string(locals.size()) +
                        " participants");
  const std::size_t n = locals[0].rows(), d = locals[0].cols();
  Tensor out(Shape{n, d});
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (omega[i].size() != d)
      throw ProtocolError("weight vector " + std::to_string(i) + " has " + std::to_string(omega[i].size()) +
                          " entries, embeddings have " + std::to_string(d));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) out.at(r, c) += omega[i][c] * locals[i].at(r, c);
  }
  return out;
}

Var combine(Tape& t, Strategy s, const std::vector<Var>& locals, const std::vector<Var>& omega) {
  if (locals.empty()) throw ProtocolError("no participant embeddings to combine");
  for (std::size_t i = 1; i < locals.size(); ++i)
    if (t.value(locals[i]).rows() != t.value(locals[0]).rows())
      throw ProtocolError("participant " + std::to_string(i) + " sent " + shape_string(t.value(locals[i]).shape()) +
                          ", participant 0 sent " + shape_string(t.value(locals[0]).shape()));
  switch (s) {
    case Strategy::Concat: return locals.size() == 1 ? locals[0] : ops::concat_cols(t, locals);
    case Strategy::Average: {
      Var sum = locals.size() == 1 ? locals[0] : ops::sum_of(t, locals);
      return locals.size() == 1 ? sum : ops::scale(t, sum, 1.0 / static_cast<double>(locals.size()));
    }
    case Strategy::Weighted: {
      if (omega.size() != locals.size()) throw ProtocolError("one weight vector per participant is required");
      std::vector<Var> terms;
      for (std::size_t i = 0; i < locals.size(); ++i) terms.push_back(ops::mul_rowvec(t, locals[i], omega[i]));
      return terms.size() == 1 ? terms[0] : ops::sum_of(t, terms);
    }
  }
  throw ContractError("unknown strategy");
}

std::vector<Tensor> backward_route(const Tensor& g, Strategy s, std::size_t participants,
                                   const std::vector<std::size_t>& dims, const std::vector<Tensor>& omega) {
  require_rank(g, 2, "backward_route");
  std::vector<Tensor> out;
  const std::size_t n = g.rows();
  switch (s) {
    case Strategy::Average: {
      Tensor share = g;
      const double inv = 1.0 / static_cast<double>(participants);
      for (double& v : share.values()) v *= inv;
      out.assign(participants, share);
      break;
    }
    case Strategy::Concat: {
      std::size_t off = 0;
      for (std::size_t i = 0; i < participants; ++i) {
        Tensor block(Shape{n, dims.at(i)});
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < dims[i]; ++c) block.at(r, c) = g.at(r, off + c);
        off += dims[i];
        out.push_back(std::move(block));
      }
      if (off != g.cols()) throw ProtocolError("column blocks do not cover the server-input gradient");
      break;
    }
    case Strategy::Weighted: {
      if (omega.size() != participants) throw ProtocolError("one weight vector per participant is required");
      for (std::size_t i = 0; i < participants; ++i) {
        Tensor share = g;
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) share.at(r, c) *= omega[i][c];
        out.push_back(std::move(share));
      }
      break;
    }
  }
  return out;
}

}  // namespace vsplit
