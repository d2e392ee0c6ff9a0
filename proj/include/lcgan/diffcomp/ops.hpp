#pragma once

#include <vector>

#include "lcgan/diffcomp/tensor.hpp"

// Differentiable tensor operations. Image tensors are NCHW. Binary ops accept
// equal shapes, or a single-element operand on either side that is broadcast.
namespace lcgan::ops {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> neg(const Tensor<T>& a);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(0.2));
template <typename T> Tensor<T> tanh(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
/// Derivative at 0 is taken as 0.
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);

// Full reductions to a single element, summed sequentially in row-major order.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Variance over all elements with divisor (n - correction).
template <typename T> Tensor<T> variance(const Tensor<T>& a, int correction = 0);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// Item `index` of the leading (batch) axis, keeping a unit leading axis.
template <typename T> Tensor<T> batch_item(const Tensor<T>& a, std::int64_t index);
template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
/// Per-channel statistics over batch and spatial axes: shape [C].
template <typename T> Tensor<T> channel_mean(const Tensor<T>& x);
template <typename T> Tensor<T> channel_variance(const Tensor<T>& x);

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// kernel [Cout, Cin, Kh, Kw]; bias [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 ConvGeometry geometry = {});
/// kernel [Cin, Cout, Kh, Kw]; output size (in - 1) * stride - 2 * padding + k.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride = 1, int padding = 0);

std::int64_t conv_output_size(std::int64_t in, int kernel, ConvGeometry geometry);
std::int64_t conv_transpose_output_size(std::int64_t in, int kernel, int stride, int padding);

/// Per-sample, per-channel normalization over H and W; no affine parameters.
template <typename T> Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5));

/// 2x2 mean pooling; a trailing odd row or column is dropped.
template <typename T> Tensor<T> avg_pool2(const Tensor<T>& x);
template <typename T> Tensor<T> upsample_nearest(const Tensor<T>& x, int factor);
/// Half-pixel-centre bilinear resize (align_corners = false).
template <typename T> Tensor<T> upsample_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);
/// Mean over H and W: [N, C, 1, 1].
template <typename T> Tensor<T> spatial_mean(const Tensor<T>& x);
/// Repeats a [N, C, 1, 1] tensor over an H x W grid.
template <typename T> Tensor<T> broadcast_spatial(const Tensor<T>& x, std::int64_t h, std::int64_t w);

template <typename T> Tensor<T> softmax_channels(const Tensor<T>& x);
template <typename T> Tensor<T> log_softmax_channels(const Tensor<T>& x);

}  // namespace lcgan::ops
