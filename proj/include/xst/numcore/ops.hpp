#pragma once

// Differentiable primitives. Every function records its output on the tape of
// its first argument and throws ShapeError naming the primitive and the
// offending extents when inputs do not fit.

#include <span>
#include <vector>

#include "xst/numcore/graph.hpp"

namespace xst::numcore::ops {

// a[m,k] x b[k,n]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

// x[..., in] * w[out, in]^T + bias[out]; leading axes of x are treated as rows.
// Pass an invalid Var for no bias.
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias = {});

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

// Elementwise product of equally shaped tensors.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> x, T factor);

template <typename T>
Var<T> relu(Var<T> x);

template <typename T>
Var<T> tanh(Var<T> x);

template <typename T>
Var<T> sigmoid(Var<T> x);

// Softmax along the last axis.
template <typename T>
Var<T> softmax(Var<T> x);

// Softmax over the first lengths[b] entries of row b of x[B, S]; the rest are 0.
template <typename T>
Var<T> masked_softmax(Var<T> x, std::span<const std::size_t> lengths);

// Concatenation along the last axis; leading extents must agree.
template <typename T>
Var<T> concat(std::span<const Var<T>> xs);

template <typename T>
Var<T> slice_last(Var<T> x, std::size_t begin, std::size_t len);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

// Rows of table[V, E] selected by ids -> [ids.size(), E].
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

// Strided convolution over time. x[B, T, C], w[O, K, C], bias[O].
// Zero padding of (K-1)/2 frames on the left; output length ceil(T / stride).
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> bias, std::size_t stride);

std::size_t conv_output_length(std::size_t length, std::size_t stride);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

// Per-channel normalisation of x[B, T, C] over the valid (batch x time)
// positions; lengths[b] counts valid frames of sequence b. Padded positions
// come out as exact zeros. In training mode the running statistics are
// updated in place.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, std::span<const std::size_t> lengths,
                  const BatchNormOptions& opt);

// One LSTM step from pre-activation gates[B, 4H] (order i, f, g, o).
// Returns [B, 2H] = [h | c]. Rows with active[b] == 0 carry h_prev/c_prev
// through unchanged; an empty span means all rows are active.
template <typename T>
Var<T> lstm_cell(Var<T> gates, Var<T> c_prev, Var<T> h_prev, std::span<const T> active = {});

// x[B, T, C] -> [B, C] at time t.
template <typename T>
Var<T> time_slice(Var<T> x, std::size_t t);

// T tensors of shape [B, C] -> [B, T, C].
template <typename T>
Var<T> stack_time(std::span<const Var<T>> steps);

// keys[B, S, D] . q[B, D] -> [B, S]
template <typename T>
Var<T> batched_dot(Var<T> keys, Var<T> q);

// sum_s w[b, s] * values[b, s, :] -> [B, E]
template <typename T>
Var<T> weighted_sum(Var<T> w, Var<T> values);

// Sum over rows of -log softmax(logits[n])[targets[n]], skipping rows whose
// target equals ignore_index. Returns a scalar.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, int ignore_index);

template <typename T>
Var<T> sum(Var<T> x);

// Non-differentiable helpers on plain tensors.
template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits);

}  // namespace xst::numcore::ops
