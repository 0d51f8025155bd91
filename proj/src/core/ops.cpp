#include "vsplit/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vsplit/core/errors.hpp"
#include "vsplit/core/kernels.hpp"
#include "vsplit/core/rng.hpp"

namespace vsplit::ops {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

void require_matrix(const Tensor& x, const char* op) {
  if (x.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
}

void require_vector(const Tensor& x, const char* op) {
  if (x.rank() != 1) throw DimensionError(std::string(op) + ": expected a vector, got " + shape_string(x.shape()));
}

void axpy(std::span<double> dst, std::span<const double> src, double a = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
  const std::size_t n = av.rows(), p = av.cols(), q = bv.cols();
  Tensor out(Shape{n, q});
  kernels::gemm_nn(av.values(), bv.values(), out.values(), n, p, q, false);
  return t.record(std::move(out), {a, b}, [a, b, n, p, q](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(a))
      kernels::gemm_nt(g.values(), tp.value(b).values(), tp.grad_buffer(a).values(), n, q, p, true);
    if (tp.requires_grad(b))
      kernels::gemm_tn(tp.value(a).values(), g.values(), tp.grad_buffer(b).values(), n, p, q, true);
  });
}

Var linear(Tape& t, Var x, Var w, Var b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(b);
  require_matrix(xv, "linear");
  require_matrix(wv, "linear");
  if (xv.cols() != wv.rows()) shape_fail("linear", xv, wv);
  if (bv.rank() != 1 || bv.size() != wv.cols()) shape_fail("linear bias", wv, bv);
  const std::size_t n = xv.rows(), p = xv.cols(), q = wv.cols();
  Tensor out(Shape{n, q});
  for (std::size_t i = 0; i < n; ++i) std::copy(bv.values().begin(), bv.values().end(), out.row(i).begin());
  kernels::gemm_nn(xv.values(), wv.values(), out.values(), n, p, q, true);
  return t.record(std::move(out), {x, w, b}, [x, w, b, n, p, q](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(x))
      kernels::gemm_nt(g.values(), tp.value(w).values(), tp.grad_buffer(x).values(), n, q, p, true);
    if (tp.requires_grad(w))
      kernels::gemm_tn(tp.value(x).values(), g.values(), tp.grad_buffer(w).values(), n, p, q, true);
    if (tp.requires_grad(b)) {
      auto gb = tp.grad_buffer(b).values();
      for (std::size_t i = 0; i < n; ++i) axpy(gb, g.row(i));
    }
  });
}

Var typed_linear(Tape& t, Var x, std::span<const std::size_t> types, const std::vector<Var>& weights,
                 const std::vector<Var>& biases) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "typed_linear");
  if (types.size() != xv.rows())
    throw DimensionError("typed_linear: " + std::to_string(types.size()) + " type tags for " +
                         std::to_string(xv.rows()) + " rows");
  if (weights.empty() || weights.size() != biases.size())
    throw DimensionError("typed_linear: need one weight and bias per type");
  const std::size_t n = xv.rows(), p = xv.cols();
  const std::size_t q = t.value(weights[0]).cols();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const Tensor& wv = t.value(weights[k]);
    const Tensor& bv = t.value(biases[k]);
    require_matrix(wv, "typed_linear");
    if (wv.rows() != p || wv.cols() != q) shape_fail("typed_linear", xv, wv);
    if (bv.rank() != 1 || bv.size() != q) shape_fail("typed_linear bias", wv, bv);
  }
  for (auto ty : types)
    if (ty >= weights.size()) throw DimensionError("typed_linear: type tag " + std::to_string(ty) + " out of range");

  // Rows grouped by type so each group is one gemm.
  std::vector<std::vector<std::size_t>> groups(weights.size());
  for (std::size_t i = 0; i < n; ++i) groups[types[i]].push_back(i);

  Tensor out(Shape{n, q});
  std::vector<double> packed, result;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& rows = groups[k];
    if (rows.empty()) continue;
    packed.resize(rows.size() * p);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy_n(xv.row(rows[r]).begin(), p, packed.begin() + static_cast<std::ptrdiff_t>(r * p));
    result.assign(rows.size() * q, 0.0);
    const Tensor& bv = t.value(biases[k]);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(bv.values().begin(), bv.values().end(), result.begin() + static_cast<std::ptrdiff_t>(r * q));
    kernels::gemm_nn(packed, t.value(weights[k]).values(), result, rows.size(), p, q, true);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy_n(result.begin() + static_cast<std::ptrdiff_t>(r * q), q, out.row(rows[r]).begin());
  }

  std::vector<Var> inputs{x};
  inputs.insert(inputs.end(), weights.begin(), weights.end());
  inputs.insert(inputs.end(), biases.begin(), biases.end());
  return t.record(std::move(out), inputs,
                  [x, weights, biases, groups = std::move(groups), p, q](Tape& tp, const Tensor& g, const Tensor&) {
                    std::vector<double> packed_x, packed_g, dx;
                    for (std::size_t k = 0; k < groups.size(); ++k) {
                      const auto& rows = groups[k];
                      if (rows.empty()) continue;
                      const std::size_t m = rows.size();
                      packed_g.resize(m * q);
                      for (std::size_t r = 0; r < m; ++r)
                        std::copy_n(g.row(rows[r]).begin(), q, packed_g.begin() + static_cast<std::ptrdiff_t>(r * q));
                      if (tp.requires_grad(x)) {
                        dx.assign(m * p, 0.0);
                        kernels::gemm_nt(packed_g, tp.value(weights[k]).values(), dx, m, q, p, false);
                        auto& gx = tp.grad_buffer(x);
                        for (std::size_t r = 0; r < m; ++r)
                          axpy(gx.row(rows[r]), std::span<const double>(dx.data() + r * p, p));
                      }
                      if (tp.requires_grad(weights[k])) {
                        packed_x.resize(m * p);
                        const Tensor& xv = tp.value(x);
                        for (std::size_t r = 0; r < m; ++r)
                          std::copy_n(xv.row(rows[r]).begin(), p,
                                      packed_x.begin() + static_cast<std::ptrdiff_t>(r * p));
                        kernels::gemm_tn(packed_x, packed_g, tp.grad_buffer(weights[k]).values(), m, p, q, true);
                      }
                      if (tp.requires_grad(biases[k])) {
                        auto gb = tp.grad_buffer(biases[k]).values();
                        for (std::size_t r = 0; r < m; ++r)
                          axpy(gb, std::span<const double>(packed_g.data() + r * q, q));
                      }
                    }
                  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) shape_fail("add", av, bv);
  Tensor out = av;
  axpy(out.values(), bv.values());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(a)) axpy(tp.grad_buffer(a).values(), g.values());
    if (tp.requires_grad(b)) axpy(tp.grad_buffer(b).values(), g.values());
  });
}

Var sub(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) shape_fail("sub", av, bv);
  Tensor out = av;
  axpy(out.values(), bv.values(), -1.0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(a)) axpy(tp.grad_buffer(a).values(), g.values());
    if (tp.requires_grad(b)) axpy(tp.grad_buffer(b).values(), g.values(), -1.0);
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) shape_fail("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& av2 = tp.value(a);
    const Tensor& bv2 = tp.value(b);
    if (tp.requires_grad(a)) {
      auto ga = tp.grad_buffer(a).values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (tp.requires_grad(b)) {
      auto gb = tp.grad_buffer(b).values();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var scale(Tape& t, Var a, double factor) {
  Tensor out = t.value(a);
  for (auto& v : out.values()) v *= factor;
  return t.record(std::move(out), {a}, [a, factor](Tape& tp, const Tensor& g, const Tensor&) {
    axpy(tp.grad_buffer(a).values(), g.values(), factor);
  });
}

Var sum_of(Tape& t, const std::vector<Var>& terms) {
  if (terms.empty()) throw DimensionError("sum_of: no terms");
  if (terms.size() == 1) return terms[0];
  Tensor out = t.value(terms[0]);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const Tensor& v = t.value(terms[k]);
    if (v.shape() != out.shape()) shape_fail("sum_of", out, v);
    axpy(out.values(), v.values());
  }
  return t.record(std::move(out), terms, [terms](Tape& tp, const Tensor& g, const Tensor&) {
    for (auto v : terms)
      if (tp.requires_grad(v)) axpy(tp.grad_buffer(v).values(), g.values());
  });
}

Var add_rowvec(Tape& t, Var x, Var v) {
  const Tensor& xv = t.value(x);
  const Tensor& vv = t.value(v);
  require_matrix(xv, "add_rowvec");
  if (vv.rank() != 1 || vv.size() != xv.cols()) shape_fail("add_rowvec", xv, vv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) axpy(out.row(i), vv.values());
  return t.record(std::move(out), {x, v}, [x, v](Tape& tp, const Tensor& g, const Tensor&) {
    if (tp.requires_grad(x)) axpy(tp.grad_buffer(x).values(), g.values());
    if (tp.requires_grad(v)) {
      auto gv = tp.grad_buffer(v).values();
      for (std::size_t i = 0; i < g.rows(); ++i) axpy(gv, g.row(i));
    }
  });
}

Var mul_rowvec(Tape& t, Var x, Var w) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_matrix(xv, "mul_rowvec");
  if (wv.rank() != 1 || wv.size() != xv.cols()) shape_fail("mul_rowvec", xv, wv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= wv[j];
  }
  return t.record(std::move(out), {x, w}, [x, w](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& xv2 = tp.value(x);
    const Tensor& wv2 = tp.value(w);
    if (tp.requires_grad(x)) {
      auto& gx = tp.grad_buffer(x);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto dst = gx.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) dst[j] += gr[j] * wv2[j];
      }
    }
    if (tp.requires_grad(w)) {
      auto gw = tp.grad_buffer(w).values();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto xr = xv2.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) gw[j] += gr[j] * xr[j];
      }
    }
  });
}

Var elu(Tape& t, Var x, double alpha) {
  Tensor out = t.value(x);
  for (auto& v : out.values()) v = v > 0.0 ? v : alpha * std::expm1(v);
  return t.record(std::move(out), {x}, [x, alpha](Tape& tp, const Tensor& g, const Tensor& y) {
    const Tensor& xv = tp.value(x);
    auto gx = tp.grad_buffer(x).values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : y[i] + alpha);
  });
}

Var tanh(Tape& t, Var x) {
  Tensor out = t.value(x);
  for (auto& v : out.values()) v = std::tanh(v);
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g, const Tensor& y) {
    auto gx = tp.grad_buffer(x).values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  Tensor out = t.value(x);
  for (auto& v : out.values()) v = v > 0.0 ? v : slope * v;
  return t.record(std::move(out), {x}, [x, slope](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& xv = tp.value(x);
    auto gx = tp.grad_buffer(x).values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : slope);
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = t.value(parts[0]).rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (auto p : parts) {
    const Tensor& v = t.value(p);
    require_matrix(v, "concat_cols");
    if (v.rows() != n) shape_fail("concat_cols", t.value(parts[0]), v);
    offsets.push_back(total);
    total += v.cols();
  }
  Tensor out(Shape{n, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = t.value(parts[k]);
    for (std::size_t i = 0; i < n; ++i) std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + offsets[k]);
  }
  return t.record(std::move(out), parts, [parts, offsets](Tape& tp, const Tensor& g, const Tensor&) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!tp.requires_grad(parts[k])) continue;
      auto& gp = tp.grad_buffer(parts[k]);
      const std::size_t w = gp.cols();
      for (std::size_t i = 0; i < gp.rows(); ++i)
        axpy(gp.row(i), g.row(i).subspan(offsets[k], w));
    }
  });
}

Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "slice_cols");
  if (begin > end || end > xv.cols())
    throw DimensionError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                         shape_string(xv.shape()));
  const std::size_t n = xv.rows(), w = end - begin;
  Tensor out(Shape{n, w});
  for (std::size_t i = 0; i < n; ++i) std::copy_n(xv.row(i).begin() + begin, w, out.row(i).begin());
  return t.record(std::move(out), {x}, [x, begin, w](Tape& tp, const Tensor& g, const Tensor&) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.rows(); ++i) axpy(gx.row(i).subspan(begin, w), g.row(i));
  });
}

Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "slice_rows");
  if (begin > end || end > xv.rows())
    throw DimensionError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                         shape_string(xv.shape()));
  const std::size_t c = xv.cols();
  Tensor out(Shape{end - begin, c});
  std::copy(xv.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
            xv.values().begin() + static_cast<std::ptrdiff_t>(end * c), out.values().begin());
  return t.record(std::move(out), {x}, [x, begin, c](Tape& tp, const Tensor& g, const Tensor&) {
    auto gx = tp.grad_buffer(x).values().subspan(begin * c, g.size());
    axpy(gx, g.values());
  });
}

Var reshape(Tape& t, Var x, Shape shape) {
  const Tensor& xv = t.value(x);
  if (shape_numel(shape) != xv.size())
    throw DimensionError("reshape: cannot view " + shape_string(xv.shape()) + " as " + shape_string(shape));
  return t.record(Tensor(std::move(shape), xv.storage()), {x}, [x](Tape& tp, const Tensor& g, const Tensor&) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var gather_rows(Tape& t, Var x, std::vector<std::size_t> index) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 1 && xv.rank() != 2)
    throw DimensionError("gather_rows: expected vector or matrix, got " + shape_string(xv.shape()));
  const std::size_t c = xv.cols();
  for (auto i : index)
    if (i >= xv.rows())
      throw DimensionError("gather_rows: row " + std::to_string(i) + " outside " + shape_string(xv.shape()));
  Shape shape = xv.rank() == 1 ? Shape{index.size()} : Shape{index.size(), c};
  Tensor out(shape);
  for (std::size_t k = 0; k < index.size(); ++k)
    std::copy_n(xv.values().begin() + static_cast<std::ptrdiff_t>(index[k] * c), c,
                out.values().begin() + static_cast<std::ptrdiff_t>(k * c));
  return t.record(std::move(out), {x}, [x, index = std::move(index), c](Tape& tp, const Tensor& g, const Tensor&) {
    auto gx = tp.grad_buffer(x).values();
    for (std::size_t k = 0; k < index.size(); ++k)
      axpy(gx.subspan(index[k] * c, c), g.values().subspan(k * c, c));
  });
}

Var stack(Tape& t, const std::vector<Var>& scalars) {
  Tensor out(Shape{scalars.size()});
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    const Tensor& v = t.value(scalars[k]);
    if (v.size() != 1) throw DimensionError("stack: element " + std::to_string(k) + " is " + shape_string(v.shape()));
    out[k] = v[0];
  }
  return t.record(std::move(out), scalars, [scalars](Tape& tp, const Tensor& g, const Tensor&) {
    for (std::size_t k = 0; k < scalars.size(); ++k)
      if (tp.requires_grad(scalars[k])) tp.grad_buffer(scalars[k])[0] += g[k];
  });
}

Var row_dot(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_matrix(av, "row_dot");
  if (av.shape() != bv.shape()) shape_fail("row_dot", av, bv);
  const std::size_t n = av.rows();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    auto ar = av.row(i), br = bv.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < ar.size(); ++j) acc += ar[j] * br[j];
    out[i] = acc;
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& av2 = tp.value(a);
    const Tensor& bv2 = tp.value(b);
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) axpy(ga.row(i), bv2.row(i), g[i]);
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) axpy(gb.row(i), av2.row(i), g[i]);
    }
  });
}

Var matvec(Tape& t, Var x, Var v) {
  const Tensor& xv = t.value(x);
  const Tensor& vv = t.value(v);
  require_matrix(xv, "matvec");
  require_vector(vv, "matvec");
  if (vv.size() != xv.cols()) shape_fail("matvec", xv, vv);
  const std::size_t n = xv.rows();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    auto r = xv.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * vv[j];
    out[i] = acc;
  }
  return t.record(std::move(out), {x, v}, [x, v](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& xv2 = tp.value(x);
    const Tensor& vv2 = tp.value(v);
    if (tp.requires_grad(x)) {
      auto& gx = tp.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) axpy(gx.row(i), vv2.values(), g[i]);
    }
    if (tp.requires_grad(v)) {
      auto gv = tp.grad_buffer(v).values();
      for (std::size_t i = 0; i < g.size(); ++i) axpy(gv, xv2.row(i), g[i]);
    }
  });
}

Var sum_all(Tape& t, Var x) {
  double acc = 0.0;
  for (double v : t.value(x).values()) acc += v;
  return t.record(Tensor::scalar(acc), {x}, [x](Tape& tp, const Tensor& g, const Tensor&) {
    for (auto& v : tp.grad_buffer(x).values()) v += g[0];
  });
}

Var mean_all(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.empty()) throw DomainError("mean_all: empty tensor");
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return t.record(Tensor::scalar(acc * inv), {x}, [x, inv](Tape& tp, const Tensor& g, const Tensor&) {
    for (auto& v : tp.grad_buffer(x).values()) v += g[0] * inv;
  });
}

std::vector<double> softmax_values(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw DomainError("softmax of an empty vector");
  if (!(temperature > 0.0)) throw DomainError("softmax temperature must be positive");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, temperature * v);
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(temperature * logits[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

Var softmax(Tape& t, Var v, double temperature) {
  const Tensor& vv = t.value(v);
  require_vector(vv, "softmax");
  Tensor out(Shape{vv.size()}, softmax_values(vv.values(), temperature));
  return t.record(std::move(out), {v}, [v, temperature](Tape& tp, const Tensor& g, const Tensor& y) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * g[i];
    auto gv = tp.grad_buffer(v).values();
    for (std::size_t i = 0; i < y.size(); ++i) gv[i] += temperature * y[i] * (g[i] - dot);
  });
}

Var segment_softmax(Tape& t, Var scores, std::vector<std::size_t> segment, std::size_t count, double temperature) {
  const Tensor& sv = t.value(scores);
  require_vector(sv, "segment_softmax");
  if (segment.size() != sv.size())
    throw DimensionError("segment_softmax: " + std::to_string(segment.size()) + " segment ids for " +
                         std::to_string(sv.size()) + " scores");
  if (!(temperature > 0.0)) throw DomainError("segment_softmax temperature must be positive");
  std::vector<double> mx(count, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < sv.size(); ++e) {
    if (segment[e] >= count) throw DimensionError("segment_softmax: segment id out of range");
    mx[segment[e]] = std::max(mx[segment[e]], temperature * sv[e]);
  }
  Tensor out(Shape{sv.size()});
  std::vector<double> z(count, 0.0);
  for (std::size_t e = 0; e < sv.size(); ++e) {
    out[e] = std::exp(temperature * sv[e] - mx[segment[e]]);
    z[segment[e]] += out[e];
  }
  for (std::size_t e = 0; e < sv.size(); ++e) out[e] /= z[segment[e]];
  return t.record(std::move(out), {scores},
                  [scores, segment = std::move(segment), count, temperature](Tape& tp, const Tensor& g,
                                                                             const Tensor& y) {
                    std::vector<double> dot(count, 0.0);
                    for (std::size_t e = 0; e < y.size(); ++e) dot[segment[e]] += y[e] * g[e];
                    auto gs = tp.grad_buffer(scores).values();
                    for (std::size_t e = 0; e < y.size(); ++e)
                      gs[e] += temperature * y[e] * (g[e] - dot[segment[e]]);
                  });
}

Var scale_rows(Tape& t, Var x, Var w) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_matrix(xv, "scale_rows");
  if (wv.rank() != 1 || wv.size() != xv.rows()) shape_fail("scale_rows", xv, wv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (auto& v : out.row(i)) v *= wv[i];
  return t.record(std::move(out), {x, w}, [x, w](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& xv2 = tp.value(x);
    const Tensor& wv2 = tp.value(w);
    if (tp.requires_grad(x)) {
      auto& gx = tp.grad_buffer(x);
      for (std::size_t i = 0; i < g.rows(); ++i) axpy(gx.row(i), g.row(i), wv2[i]);
    }
    if (tp.requires_grad(w)) {
      auto gw = tp.grad_buffer(w).values();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i), xr = xv2.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < gr.size(); ++j) acc += gr[j] * xr[j];
        gw[i] += acc;
      }
    }
  });
}

Var segment_sum(Tape& t, Var x, std::vector<std::size_t> segment, std::size_t count) {
  const Tensor& xv = t.value(x);
  require_matrix(xv, "segment_sum");
  if (segment.size() != xv.rows())
    throw DimensionError("segment_sum: " + std::to_string(segment.size()) + " segment ids for " +
                         shape_string(xv.shape()));
  const std::size_t c = xv.cols();
  Tensor out(Shape{count, c});
  for (std::size_t e = 0; e < segment.size(); ++e) {
    if (segment[e] >= count) throw DimensionError("segment_sum: segment id out of range");
    axpy(out.row(segment[e]), xv.row(e));
  }
  return t.record(std::move(out), {x}, [x, segment = std::move(segment)](Tape& tp, const Tensor& g, const Tensor&) {
    auto& gx = tp.grad_buffer(x);
    for (std::size_t e = 0; e < segment.size(); ++e) axpy(gx.row(e), g.row(segment[e]));
  });
}

Var weighted_sum(Tape& t, const std::vector<Var>& xs, Var beta) {
  const Tensor& bv = t.value(beta);
  require_vector(bv, "weighted_sum");
  if (xs.empty() || bv.size() != xs.size())
    throw DimensionError("weighted_sum: " + std::to_string(xs.size()) + " terms for " +
                         std::to_string(bv.size()) + " weights");
  Tensor out = Tensor::zeros_like(t.value(xs[0]));
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const Tensor& xv = t.value(xs[r]);
    if (xv.shape() != out.shape()) shape_fail("weighted_sum", out, xv);
    axpy(out.values(), xv.values(), bv[r]);
  }
  std::vector<Var> inputs = xs;
  inputs.push_back(beta);
  return t.record(std::move(out), inputs, [xs, beta](Tape& tp, const Tensor& g, const Tensor&) {
    const Tensor& bv2 = tp.value(beta);
    for (std::size_t r = 0; r < xs.size(); ++r)
      if (tp.requires_grad(xs[r])) axpy(tp.grad_buffer(xs[r]).values(), g.values(), bv2[r]);
    if (tp.requires_grad(beta)) {
      auto gb = tp.grad_buffer(beta).values();
      for (std::size_t r = 0; r < xs.size(); ++r) {
        const Tensor& xv = tp.value(xs[r]);
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
        gb[r] += acc;
      }
    }
  });
}

Var cross_entropy(Tape& t, Var logits, std::span<const std::size_t> labels) {
  const Tensor& lv = t.value(logits);
  require_matrix(lv, "cross_entropy");
  const std::size_t n = lv.rows(), c = lv.cols();
  if (labels.size() != n)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         shape_string(lv.shape()));
  if (n == 0) throw DomainError("cross_entropy: empty batch");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= c)
      throw DomainError("cross_entropy: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside [0," + std::to_string(c) + ")");
  Tensor probs(Shape{n, c});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = softmax_values(lv.row(i));
    std::copy(p.begin(), p.end(), probs.row(i).begin());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : lv.row(i)) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : lv.row(i)) z += std::exp(v - mx);
    loss += mx + std::log(z) - lv.at(i, labels[i]);
  }
  loss /= static_cast<double>(n);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return t.record(Tensor::scalar(loss), {logits},
                  [logits, probs = std::move(probs), lab = std::move(lab), n](Tape& tp, const Tensor& g,
                                                                             const Tensor&) {
                    auto& gl = tp.grad_buffer(logits);
                    const double s = g[0] / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                      auto pr = probs.row(i);
                      auto dst = gl.row(i);
                      for (std::size_t j = 0; j < pr.size(); ++j)
                        dst[j] += s * (pr[j] - (j == lab[i] ? 1.0 : 0.0));
                    }
                  });
}

std::vector<std::uint8_t> dropout_mask(std::size_t n, double rate, std::uint64_t key) {
  std::vector<std::uint8_t> keep(n, 1);
  if (rate <= 0.0) return keep;
  Rng rng(key);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& k : keep) k = u(rng) >= rate ? 1 : 0;
  return keep;
}

Var dropout(Tape& t, Var x, double rate, std::uint64_t key, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0,1)");
  if (!training || rate == 0.0) return x;
  const Tensor& xv = t.value(x);
  auto keep = dropout_mask(xv.size(), rate, key);
  const double s = 1.0 / (1.0 - rate);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep[i] ? out[i] * s : 0.0;
  return t.record(std::move(out), {x}, [x, keep = std::move(keep), s](Tape& tp, const Tensor& g, const Tensor&) {
    auto gx = tp.grad_buffer(x).values();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (keep[i]) gx[i] += g[i] * s;
  });
}

}  // namespace vsplit::ops
