#pragma once

#include <array>

#include "idsr/alp.hpp"
#include "idsr/autodiff/ops.hpp"
#include "idsr/scalespace.hpp"

namespace idsr::training {

template <class T>
using Tensor = ad::Tensor<T>;

/// BT.601 luma of an N x 3 x H x W batch through a fixed 1x1 convolution.
/// Single-channel input is returned unchanged.
template <class T>
Tensor<T> luminance(const Tensor<T>& rgb);

/// N x J x H x W stack of eta_j maps, j = 1..3 (or 0..3 with include_eta0),
/// from fixed LoG-basis convolutions combined by the cubic coefficients.
/// Input must have one channel.
template <class T>
Tensor<T> eta_stack(const Tensor<T>& gray, const alp::AlpBasis& basis, bool include_eta0 = false);

/// Mean over the batch of sum_j sum_{u,v} |eta_j(clean) - eta_j(derained)| / (H W).
/// Any channel count: channels are treated as separate images.
template <class T>
Tensor<T> alp_loss_diff(const Tensor<T>& clean, const Tensor<T>& derained, const alp::AlpBasis& basis,
                        bool include_eta0 = false);

/// Sum over the Gaussian scales and both forward-difference directions of
/// the mean |grad blur(clean) - grad blur(derained)| over batch and pixels.
template <class T>
Tensor<T> grad_loss_diff(const Tensor<T>& clean, const Tensor<T>& derained,
                         const std::array<double, 5>& scales = scalespace::kStackScales);

/// Image-domain reference of grad_loss_diff for one grayscale pair.
double grad_loss(const Image& clean, const Image& derained,
                 const std::array<double, 5>& scales = scalespace::kStackScales);

}  // namespace idsr::training
