#pragma once

#include <span>

#include "nlgnn/rng.hpp"
#include "nlgnn/tensor.hpp"

namespace nlgnn {

// Differentiable operations. Each op validates shapes, computes the forward
// result and, when any input requires grad, records a backward closure on the
// tape. Gradients accumulate (+=) into the inputs' grad buffers.

// a[m×k] · b[k×p] -> [m×p]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// a[n×m] · v[m] -> [n]
Tensor matvec(Tape& tape, const Tensor& a, const Tensor& v);

// seq[n×f], kernel[k×f×g] (k odd), bias[g] -> [n×g], zero padded so the
// output has the same length as the input.
Tensor conv1d(Tape& tape, const Tensor& seq, const Tensor& kernel,
              const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& x);
Tensor leaky_relu(Tape& tape, const Tensor& x, double negative_slope);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);  // same shape
Tensor add_bias(Tape& tape, const Tensor& m, const Tensor& bias);  // row-wise
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);  // elementwise
Tensor elem_log(Tape& tape, const Tensor& x);
Tensor sum(Tape& tape, const Tensor& x);  // -> scalar

// out[v,:] = weights[v] * m[v,:]
Tensor scale_rows(Tape& tape, const Tensor& m, const Tensor& weights);

// [a | b] along columns.
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);

// out[i,:] = x[index[i],:] (rank 2) or out[i] = x[index[i]] (rank 1).
Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::span<const std::size_t> index);

// Zeroes entries with probability p and rescales survivors by 1/(1-p).
// Identity when p == 0 or training == false. Mask draws come from rng, so a
// seeded run is reproducible.
Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool training);

// Row-stabilized softmax over the last dimension of a rank-2 tensor.
Tensor softmax_rows(Tape& tape, const Tensor& x);

// Mean negative log-softmax over the masked nodes; row-max stabilized.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels,
                             std::span<const std::size_t> mask);

bool all_finite(const Tensor& t);

}  // namespace nlgnn
