#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idsr/autodiff/adam.hpp"
#include "idsr/autodiff/ops.hpp"
#include "idsr/image.hpp"
#include "idsr/rng.hpp"

namespace idsr::nets {

enum class NetKind { dprnet, ggirnet };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& name);

struct NetConfig {
  int blocks = 4;
  int channels = 32;
  int input_channels = 3;
  /// GGIRNet only; false gives the CGARB variant without the GAM stage.
  bool use_gam = true;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

inline constexpr int kCamReduction = 4;
inline constexpr int kSamKernel = 7;
inline constexpr int kGamKernel = 5;

template <class T>
using ParamSet = ad::ParamSet<T>;
template <class T>
using Tensor = ad::Tensor<T>;

/// Kaiming-uniform (fan-in, ReLU gain) weight `<name>.w` of shape
/// cout x cin x k x k and zero bias `<name>.b`.
template <class T>
void add_conv(ParamSet<T>& params, const std::string& name, int cout, int cin, int k, Rng& rng);

template <class T>
void add_cam_params(ParamSet<T>& params, const std::string& prefix, int channels, Rng& rng);
template <class T>
void add_sam_params(ParamSet<T>& params, const std::string& prefix, Rng& rng);
/// W_q / b_q for q = 1..7 registered as `<prefix>.q<q>.w` / `<prefix>.q<q>.b`.
template <class T>
void add_gam_params(ParamSet<T>& params, const std::string& prefix, int channels, Rng& rng);
template <class T>
void add_block_params(ParamSet<T>& params, const std::string& prefix, int channels, NetKind kind,
                      bool use_gam, Rng& rng);

/// F scaled per channel by sigmoid(MLP(avgpool F) + MLP(maxpool F)).
template <class T>
Tensor<T> cam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix);
/// F times sigmoid(conv7x7([mean_c F, max_c F])).
template <class T>
Tensor<T> sam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix);
/// Gradient attention map M_G (N x 1 x H x W) from depthwise Sobel gradients.
template <class T>
Tensor<T> gam_map(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix);
/// F times gam_map(F).
template <class T>
Tensor<T> gam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix);

/// conv3x3-ReLU-conv3x3-ReLU -> CAM -> SAM, plus the input.
template <class T>
Tensor<T> csarb_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix);
/// conv3x3-ReLU-conv3x3-ReLU -> CAM -> GAM (optional), plus the input.
template <class T>
Tensor<T> cgarb_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix,
                        bool use_gam = true);

template <class T>
struct Model {
  NetKind kind = NetKind::dprnet;
  NetConfig config;
  ParamSet<T> params;
};

template <class T>
Model<T> make_model(NetKind kind, const NetConfig& config, std::uint64_t seed);

template <class T>
struct NetOutput {
  Tensor<T> rain;
  Tensor<T> derained;
};

/// head conv3x3 -> blocks -> + head features -> tail conv3x3 = rain
/// estimate; derained = x - rain.
template <class T>
NetOutput<T> forward(const Model<T>& model, const Tensor<T>& x);

/// Stack same-sized images into N x C x H x W.
template <class T>
Tensor<T> images_to_tensor(const std::vector<Image>& images);
template <class T>
Image tensor_to_image(const Tensor<T>& t, int n);

/// Inference on one image without recording history.
Image derain(const Model<float>& model, const Image& rainy);
/// Rain estimate and derained image.
std::pair<Image, Image> derain_with_rain(const Model<float>& model, const Image& rainy);

}  // namespace idsr::nets
