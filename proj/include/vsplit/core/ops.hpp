#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vsplit/core/autograd.hpp"

// Differentiable primitives. Every function records one node on the tape and
// validates shapes up front, throwing DimensionError with both shapes.

namespace vsplit::ops {

// --- dense algebra --------------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
/// x[n x p] * W[p x q] + b[q]
Var linear(Tape& t, Var x, Var w, Var b);
/// Row i uses W[types[i]], b[types[i]]; all W share the output width.
Var typed_linear(Tape& t, Var x, std::span<const std::size_t> types, const std::vector<Var>& weights,
                 const std::vector<Var>& biases);

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
/// n-ary elementwise sum of same-shape tensors.
Var sum_of(Tape& t, const std::vector<Var>& terms);

/// x[n x d] + v[d] broadcast over rows.
Var add_rowvec(Tape& t, Var x, Var v);
/// x[n x d] (.) w[d] broadcast over rows.
Var mul_rowvec(Tape& t, Var x, Var w);

// --- activations ----------------------------------------------------------

Var elu(Tape& t, Var x, double alpha = 1.0);
Var tanh(Tape& t, Var x);
Var leaky_relu(Tape& t, Var x, double slope = 0.2);

// --- shape plumbing -------------------------------------------------------

Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end);
Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t end);
/// out[k] = x[index[k]]; works on vectors and matrices. Backward scatter-adds.
Var gather_rows(Tape& t, Var x, std::vector<std::size_t> index);
/// Same values, new shape with equal element count.
Var reshape(Tape& t, Var x, Shape shape);
/// Stacks scalars into a vector.
Var stack(Tape& t, const std::vector<Var>& scalars);

// --- reductions and attention ---------------------------------------------

/// out[i] = <a[i,:], b[i,:]>
Var row_dot(Tape& t, Var a, Var b);
/// out[i] = <x[i,:], v>
Var matvec(Tape& t, Var x, Var v);
Var sum_all(Tape& t, Var x);
Var mean_all(Tape& t, Var x);

/// Softmax of temperature * v over all entries of a vector.
Var softmax(Tape& t, Var v, double temperature = 1.0);
/// Softmax of temperature * scores within each segment (segment[e] < count).
Var segment_softmax(Tape& t, Var scores, std::vector<std::size_t> segment, std::size_t count,
                    double temperature = 1.0);
/// out[e,:] = w[e] * x[e,:]
Var scale_rows(Tape& t, Var x, Var w);
/// out[s,:] = sum of x[e,:] with segment[e] == s
Var segment_sum(Tape& t, Var x, std::vector<std::size_t> segment, std::size_t count);
/// sum_r beta[r] * xs[r]
Var weighted_sum(Tape& t, const std::vector<Var>& xs, Var beta);

// --- losses and regularisation --------------------------------------------

/// Mean over rows of -log softmax(logits[i])[labels[i]].
Var cross_entropy(Tape& t, Var logits, std::span<const std::size_t> labels);

/// Inverted dropout. The mask is a pure function of `key`; inference mode and
/// rate == 0 both return the input node itself.
Var dropout(Tape& t, Var x, double rate, std::uint64_t key, bool training);

// --- tape-free helpers ----------------------------------------------------

std::vector<double> softmax_values(std::span<const double> logits, double temperature = 1.0);
std::vector<std::uint8_t> dropout_mask(std::size_t n, double rate, std::uint64_t key);

}  // namespace vsplit::ops
