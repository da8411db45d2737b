#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vhu/tensor.hpp"

// Differentiable tensor ops. Every op checks its output for NaN/Inf and throws
// NumericalError naming itself.
namespace vhu {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
// Subgradient 0 at the origin.
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
// Zero gradient outside [lo, hi].
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions to a 0-d tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Same data, new extents (element count must match).
Tensor reshape(const Tensor& a, Shape shape);
// 1-D window [offset, offset + length) of a flattened tensor.
Tensor slice(const Tensor& a, std::size_t offset, std::size_t length);

// Matrices are 2-D row-major.
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
// a[M,N] + bias[N] broadcast over rows.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
// Column-wise concatenation of [M, N_i] matrices.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor softmax_rows(const Tensor& a);
// Per-row normalization over the last axis with affine gamma/beta [N].
Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps);

// Image ops on [C,H,W].
/// Cross-correlation with kernel [C_out, C_in, k, k], k odd. Optional bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding,
              const Tensor& bias = Tensor());
// Per-channel normalization over H*W with affine gamma/beta [C].
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
// gamma[c] * x[c,h,w] + beta[c].
Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta);
// x[c,h,w] * w[h,w], weights shared over channels.
Tensor spatial_mul(const Tensor& x, const Tensor& w);
Tensor max_pool2x2(const Tensor& x);
Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace vhu
