#pragma once

#include <utility>
#include <vector>

#include "idsr/autodiff/tensor.hpp"

namespace idsr::ad {

enum class Padding { replicate, zero };

/// Stride-1 "same" cross-correlation. x: N x Cin x H x W, weight:
/// Cout x Cin x kh x kw (odd sizes), bias: 1 x Cout x 1 x 1 or undefined.
/// Weight and bias receive gradients iff they require them, so fixed
/// kernels are simply tensors created without requires_grad.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {},
                 Padding padding = Padding::replicate);

/// Per-channel correlation with a fixed kernel. kernel: C x 1 x kh x kw, or
/// 1 x 1 x kh x kw shared by every channel. The kernel must not require grad.
template <class T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                           Padding padding = Padding::replicate);

/// Fixed 1-D taps along rows (horizontal) or columns (vertical) for every
/// channel, replicate borders, centered: out[i] = sum_t k[t] in[i + t - r].
template <class T>
Tensor<T> filter_rows(const Tensor<T>& x, const std::vector<double>& taps);
template <class T>
Tensor<T> filter_cols(const Tensor<T>& x, const std::vector<double>& taps);

template <class T>
Tensor<T> relu(const Tensor<T>& x);
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
/// Channel slice [begin, begin + count).
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count);

/// x: N x C x H x W times map: N x 1 x H x W, broadcast over channels.
template <class T>
Tensor<T> broadcast_mul_channel(const Tensor<T>& x, const Tensor<T>& map);
/// x: N x C x H x W times s: N x C x 1 x 1, broadcast over pixels.
template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);

/// Mean and max across channels: two N x 1 x H x W tensors. Max routes its
/// gradient to the first argmax.
template <class T>
std::pair<Tensor<T>, Tensor<T>> channel_pool_stats(const Tensor<T>& x);
/// Mean and max over pixels: two N x C x 1 x 1 tensors.
template <class T>
std::pair<Tensor<T>, Tensor<T>> global_pool_stats(const Tensor<T>& x);

/// mean |a - b| with sign(0) = 0.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);
/// mean (a - b)^2
template <class T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b);
/// Same data under a new shape with equal element count.
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Sum of all elements as a 1 x 1 x 1 x 1 tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& x);

}  // namespace idsr::ad
