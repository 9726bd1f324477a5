#include "idsr/losses.hpp"

#include <cmath>

#include "idsr/error.hpp"

namespace idsr::training {

using ad::Shape;

namespace {

// Channels become separate single-channel images; the memory layout of
// N x C x H x W and NC x 1 x H x W is identical.
template <class T>
Tensor<T> as_gray_batch(const Tensor<T>& x) {
  const Shape& s = x.shape();
  return s.c == 1 ? x : ad::reshape(x, Shape{s.n * s.c, 1, s.h, s.w});
}

template <class T>
Tensor<T> zeros_like(const Tensor<T>& x) {
  return Tensor<T>::zeros(x.shape());
}

const std::vector<double> kForwardDiff = {0.0, -1.0, 1.0};

}  // namespace

template <class T>
Tensor<T> luminance(const Tensor<T>& rgb) {
  if (rgb.shape().c == 1) return rgb;
  require(rgb.shape().c == 3, Errc::shape_mismatch, "luminance expects 1 or 3 channels, got " + rgb.shape().str());
  static const Tensor<T> weight = Tensor<T>::from({1, 3, 1, 1}, {T(0.299), T(0.587), T(0.114)});
  return ad::conv2d(rgb, weight);
}

template <class T>
Tensor<T> eta_stack(const Tensor<T>& gray, const alp::AlpBasis& basis, bool include_eta0) {
  require(gray.shape().c == 1, Errc::shape_mismatch, "eta_stack expects one channel, got " + gray.shape().str());
  const int size = basis.kernels[0].size();
  std::vector<T> kernels;
  kernels.reserve(4 * static_cast<std::size_t>(size) * size);
  for (const auto& k : basis.kernels)
    for (double v : k.values) kernels.push_back(static_cast<T>(v));
  const auto log_weight = Tensor<T>::from({4, 1, size, size}, std::move(kernels));

  const int first = include_eta0 ? 0 : 1;
  const int count = 4 - first;
  std::vector<T> mix;
  for (int j = first; j <= 3; ++j)
    for (int k = 0; k < 4; ++k) mix.push_back(static_cast<T>(basis.eta_weight(j, k)));
  const auto mix_weight = Tensor<T>::from({count, 4, 1, 1}, std::move(mix));

  return ad::conv2d(ad::conv2d(gray, log_weight), mix_weight);
}

template <class T>
Tensor<T> alp_loss_diff(const Tensor<T>& clean, const Tensor<T>& derained, const alp::AlpBasis& basis,
                        bool include_eta0) {
  require(clean.shape() == derained.shape(), Errc::shape_mismatch,
          "alp_loss_diff: " + clean.shape().str() + " vs " + derained.shape().str());
  // eta maps are linear in the image, so eta(d) - eta(c) = eta(d - c)
  const auto eta = eta_stack(as_gray_batch(ad::sub(derained, clean)), basis, include_eta0);
  const T terms = static_cast<T>(eta.shape().c);
  return ad::mul_scalar(ad::l1_loss(eta, zeros_like(eta)), terms);
}

template <class T>
Tensor<T> grad_loss_diff(const Tensor<T>& clean, const Tensor<T>& derained, const std::array<double, 5>& scales) {
  require(clean.shape() == derained.shape(), Errc::shape_mismatch,
          "grad_loss_diff: " + clean.shape().str() + " vs " + derained.shape().str());
  const auto diff = as_gray_batch(ad::sub(derained, clean));
  Tensor<T> total;
  for (double sigma : scales) {
    const auto taps = scalespace::gaussian_kernel_1d(sigma);
    const auto blurred = ad::filter_cols(ad::filter_rows(diff, taps), taps);
    const auto gx = ad::filter_rows(blurred, kForwardDiff);
    const auto gy = ad::filter_cols(blurred, kForwardDiff);
    const auto term = ad::add(ad::l1_loss(gx, zeros_like(gx)), ad::l1_loss(gy, zeros_like(gy)));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

double grad_loss(const Image& clean, const Image& derained, const std::array<double, 5>& scales) {
  require(clean.channels() == 1 && derained.channels() == 1 && clean.same_size(derained),
          Errc::dimension_mismatch, "grad_loss expects two equally sized grayscale images");
  double total = 0.0;
  const double count = static_cast<double>(clean.pixel_count());
  for (double sigma : scales) {
    const auto a = scalespace::forward_diff_gradients(scalespace::gaussian_blur(clean, sigma));
    const auto b = scalespace::forward_diff_gradients(scalespace::gaussian_blur(derained, sigma));
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < a.gx.size(); ++i) {
      sx += std::abs(static_cast<double>(a.gx.data()[i]) - b.gx.data()[i]);
      sy += std::abs(static_cast<double>(a.gy.data()[i]) - b.gy.data()[i]);
    }
    total += (sx + sy) / count;
  }
  return total;
}

template Tensor<float> luminance(const Tensor<float>&);
template Tensor<double> luminance(const Tensor<double>&);
template Tensor<float> eta_stack(const Tensor<float>&, const alp::AlpBasis&, bool);
template Tensor<double> eta_stack(const Tensor<double>&, const alp::AlpBasis&, bool);
template Tensor<float> alp_loss_diff(const Tensor<float>&, const Tensor<float>&, const alp::AlpBasis&, bool);
template Tensor<double> alp_loss_diff(const Tensor<double>&, const Tensor<double>&, const alp::AlpBasis&, bool);
template Tensor<float> grad_loss_diff(const Tensor<float>&, const Tensor<float>&, const std::array<double, 5>&);
template Tensor<double> grad_loss_diff(const Tensor<double>&, const Tensor<double>&, const std::array<double, 5>&);

}  // namespace idsr::training
