// Differentiable kernels over tgn::Tensor.
//
// Each kernel validates shapes and throws std::invalid_argument naming the
// kernel and the offending shapes. Outputs require a gradient (and the kernel
// is recorded on the active tape) iff a tape is active and any input requires
// a gradient.

#ifndef TGN_OPS_H_
#define TGN_OPS_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tgn/tensor.h"

namespace tgn {

using Rng = std::mt19937_64;

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// x + row, where row is 1 x cols(x) and broadcasts over the rows of x.
Tensor add_row(const Tensor& x, const Tensor& row);

Tensor scale(const Tensor& x, Scalar factor);
Tensor add_scalar(const Tensor& x, Scalar offset);

// (n x k) * (k x m).
Tensor matmul(const Tensor& a, const Tensor& b);

// x W^T + b with x (n x in), W (out x in), b (1 x out). b may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Concatenation; all parts must share the other extent. Zero-width parts are
// allowed.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

// Half-open ranges.
Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end);
Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end);

// out[i] = x[indices[i]]; repeated indices accumulate in backward.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> indices);

// Full reductions to 1 x 1.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Row-segment reductions. offsets has size groups + 1, is non-decreasing,
// starts at 0 and ends at rows(x). Segment g covers rows
// [offsets[g], offsets[g+1]); empty segments yield a zero row (sum) and are
// rejected for the mean.
Tensor segment_sum(const Tensor& x, std::span<const std::int64_t> offsets);
Tensor segment_mean(const Tensor& x, std::span<const std::int64_t> offsets);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor cos(const Tensor& x);

// Row-wise softmax. When mask is non-empty it has numel(x) entries and a true
// entry marks a position that takes part; masked positions get exactly zero
// weight and a row with no valid position is all zeros.
Tensor softmax_rows(const Tensor& x, std::span<const std::uint8_t> mask = {});

// Inverted dropout: kept activations are divided by (1 - p). Identity when
// training is false or p == 0. p must lie in [0, 1).
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Mean binary cross-entropy of logits against {0,1} labels, computed as
// max(x,0) - x*y + log(1 + exp(-|x|)).
Tensor bce_with_logits(const Tensor& logits, const Tensor& labels);

// Grouped attention scores. queries is (B x D), keys is (B*k x D) holding k
// consecutive key rows per query. D splits into `heads` equal slices. The
// result is (B*heads x k) with row b*heads + h holding
// <q_b,h , key_{b,j},h> / sqrt(D / heads).
Tensor grouped_scores(const Tensor& queries, const Tensor& keys,
                      std::int64_t heads);

// Inverse of the layout above: weights (B*heads x k), values (B*k x D);
// output row b, head slice h = sum_j weights[b*heads+h, j] * values_{b,j},h.
Tensor grouped_mix(const Tensor& weights, const Tensor& values,
                   std::int64_t heads);

}  // namespace tgn

#endif  // TGN_OPS_H_
