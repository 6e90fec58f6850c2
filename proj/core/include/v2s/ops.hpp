#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "v2s/tensor.hpp"

namespace v2s {

// Pure forward kernels. The tape calls these, so recorded and unrecorded
// evaluation share one code path.

// x: [batch, len, ch_in], w: [ch_out, ch_in, k], b: [ch_out].
// Valid convolution, output length floor((len - k)/stride) + 1.
Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      std::size_t stride);

std::size_t conv1d_out_len(std::size_t len, std::size_t k, std::size_t stride);

// a: [n, p], b: [p, q] -> [n, q].
Tensor matmul_forward(const Tensor& a, const Tensor& b);

// rank-2 [n, m] + [m]  (rows share the bias).
Tensor add_bias_forward(const Tensor& x, const Tensor& b);

Tensor relu_forward(const Tensor& x);

// Row softmax with max subtraction; x: [n, K].
Tensor softmax_rows(const Tensor& x);

// h: [batch, steps, ch]; score_t = v . tanh(W h_t + b); weights = softmax
// over steps; context = sum_t weight_t * h_t.
struct AttentionOut {
  Tensor context;  // [batch, ch]
  Tensor weights;  // [batch, steps]
  Tensor z;        // [batch, steps, att] tanh activations, kept for backward
};
AttentionOut attention_pool_forward(const Tensor& h, const Tensor& w,
                                    const Tensor& b, const Tensor& v);

// probs: [n, K] -> [n, c]; out[i][t] = mean of probs[i][k] over k in groups[t].
Tensor label_aggregate_forward(const Tensor& probs,
                               const std::vector<std::vector<int>>& groups);

// scores: [n, c]; loss = -(1/n) sum_i log(max(scores[i, labels[i]], clamp)).
struct NllOut {
  double loss;
  std::size_t clamp_hits;
};
NllOut nll_pick_forward(const Tensor& scores, const std::vector<int>& labels,
                        double clamp = 1e-12);

}  // namespace v2s
