#pragma once

#include <cstddef>
#include <vector>

#include "mtc/tensor.hpp"

// Differentiable operations. Each op computes its result eagerly and, when a
// tape is active and some input requires grad, records a closure that
// accumulates analytic gradients into the inputs' grad buffers.

namespace mtc::ops {

// ---- elementwise / structural -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor mul(const Tensor& a, const Tensor& b);        // Hadamard, same shape
Tensor scalar_mul(double s, const Tensor& a);
Tensor sum(const Tensor& a);                         // -> shape [1]
Tensor relu(const Tensor& a);
Tensor reshape(const Tensor& a, Shape target);       // element count preserved
Tensor flatten2d(const Tensor& a);                   // [N, ...] -> [N, rest]

// ---- layers ---------------------------------------------------------------

// x: [N, C, H, W], w: [OC, C, k, k] (k odd), b: [OC]. Stride 1; zero padding
// d*(k-1)/2 keeps H and W, so kernel taps are centered on the output pixel.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t dilation = 1);

// 2x2 window, stride 2; even spatial dims required. Gradient routes to the
// argmax; ties go to the first occurrence in row-major scan order.
Tensor maxpool2d(const Tensor& x);

// Output bin (i, j) covers input rows [floor(i*H/Th), ceil((i+1)*H/Th)) and
// the analogous columns; requires H >= th, W >= tw.
Tensor adaptive_maxpool2d(const Tensor& x, std::size_t th, std::size_t tw);

// x: [N, in], w: [out, in], b: [out] -> [N, out]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

// [N, Ca, H, W] ++ [N, Cb, H, W] -> [N, Ca+Cb, H, W], a's channels first
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Row softmax on [N, C], max-subtracted for stability.
Tensor softmax(const Tensor& logits);

// ---- losses ---------------------------------------------------------------

// (1 / 2N) * sum((pred - gt)^2), N = extent(0). Shapes must match.
Tensor mse_density_loss(const Tensor& pred, const Tensor& gt);

// -sum_i log(p[i, label_i]), probabilities clamped below at 1e-12 before the
// log. Rows must sum to 1 within 1e-9. batch_mean divides by the batch size
// (default off: the reduction is a plain sum over the batch).
Tensor cross_entropy_loss(const Tensor& probs, const std::vector<int>& labels,
                          bool batch_mean = false);

// Numerically fused softmax + cross-entropy on logits; backward is p - y.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             bool batch_mean = false);

// l1 + lambda * l2 on scalars; lambda must be >= 0.
Tensor combined_loss(const Tensor& l1, const Tensor& l2, double lambda);

constexpr double kProbFloor = 1e-12;  // clamp under the CE log

}  // namespace mtc::ops
