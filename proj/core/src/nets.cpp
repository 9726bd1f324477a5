#include "idsr/nets.hpp"

#include <cmath>

#include "idsr/error.hpp"
#include "idsr/scalespace.hpp"

namespace idsr::nets {

using ad::Shape;

std::string to_string(NetKind kind) { return kind == NetKind::dprnet ? "dprnet" : "ggirnet"; }

NetKind net_kind_from_string(const std::string& name) {
  if (name == "dprnet") return NetKind::dprnet;
  if (name == "ggirnet") return NetKind::ggirnet;
  fail(Errc::invalid_argument, "unknown network '" + name + "' (expected dprnet or ggirnet)");
}

void NetConfig::validate() const {
  require(blocks >= 1, Errc::invalid_argument, "blocks must be >= 1");
  require(channels >= 8, Errc::invalid_argument, "channels must be >= 8");
  require(channels % kCamReduction == 0, Errc::invalid_argument,
          "channels must be divisible by the CAM reduction ratio");
  require(input_channels == 3, Errc::invalid_argument, "networks consume 3-channel input");
}

namespace {

template <class T>
Tensor<T> conv(const Tensor<T>& x, const ParamSet<T>& p, const std::string& name) {
  return ad::conv2d(x, p.get(name + ".w"), p.get(name + ".b"));
}

template <class T>
const Tensor<T>& sobel_kernel(bool vertical) {
  static const Tensor<T> kx = Tensor<T>::from(
      {1, 1, 3, 3}, std::vector<T>(scalespace::kSobelX.begin(), scalespace::kSobelX.end()));
  static const Tensor<T> ky = Tensor<T>::from(
      {1, 1, 3, 3}, std::vector<T>(scalespace::kSobelY.begin(), scalespace::kSobelY.end()));
  return vertical ? ky : kx;
}

template <class T>
Tensor<T> trunk(const Tensor<T>& f, const ParamSet<T>& p, const std::string& prefix) {
  return ad::relu(conv(ad::relu(conv(f, p, prefix + ".conv1")), p, prefix + ".conv2"));
}

}  // namespace

template <class T>
void add_conv(ParamSet<T>& params, const std::string& name, int cout, int cin, int k, Rng& rng) {
  const Shape ws{cout, cin, k, k};
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
  std::vector<T> w(ws.numel());
  for (T& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  params.add(name + ".w", Tensor<T>::from(ws, std::move(w), true));
  params.add(name + ".b", Tensor<T>::zeros({1, cout, 1, 1}, true));
}

template <class T>
void add_cam_params(ParamSet<T>& params, const std::string& prefix, int channels, Rng& rng) {
  const int hidden = channels / kCamReduction;
  require(hidden >= 1, Errc::invalid_argument, "CAM needs at least " + std::to_string(kCamReduction) + " channels");
  add_conv(params, prefix + ".fc1", hidden, channels, 1, rng);
  add_conv(params, prefix + ".fc2", channels, hidden, 1, rng);
}

template <class T>
void add_sam_params(ParamSet<T>& params, const std::string& prefix, Rng& rng) {
  add_conv(params, prefix + ".conv", 1, 2, kSamKernel, rng);
}

template <class T>
void add_gam_params(ParamSet<T>& params, const std::string& prefix, int channels, Rng& rng) {
  add_conv(params, prefix + ".q1", 1, channels, 1, rng);
  add_conv(params, prefix + ".q2", 1, 1, kGamKernel, rng);
  add_conv(params, prefix + ".q3", 1, 1, kGamKernel, rng);
  add_conv(params, prefix + ".q4", 1, channels, 1, rng);
  add_conv(params, prefix + ".q5", 1, 1, kGamKernel, rng);
  add_conv(params, prefix + ".q6", 1, 1, kGamKernel, rng);
  add_conv(params, prefix + ".q7", 1, 2, kGamKernel, rng);
}

template <class T>
void add_block_params(ParamSet<T>& params, const std::string& prefix, int channels, NetKind kind,
                      bool use_gam, Rng& rng) {
  add_conv(params, prefix + ".conv1", channels, channels, 3, rng);
  add_conv(params, prefix + ".conv2", channels, channels, 3, rng);
  add_cam_params(params, prefix + ".cam", channels, rng);
  if (kind == NetKind::dprnet)
    add_sam_params(params, prefix + ".sam", rng);
  else if (use_gam)
    add_gam_params(params, prefix + ".gam", channels, rng);
}

template <class T>
Tensor<T> cam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix) {
  const auto [avg, mx] = ad::global_pool_stats(f);
  auto mlp = [&](const Tensor<T>& v) {
    return conv(ad::relu(conv(v, params, prefix + ".fc1")), params, prefix + ".fc2");
  };
  return ad::scale_channels(f, ad::sigmoid(ad::add(mlp(avg), mlp(mx))));
}

template <class T>
Tensor<T> sam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix) {
  const auto [avg, mx] = ad::channel_pool_stats(f);
  const auto map = ad::sigmoid(conv(ad::concat_channels<T>({avg, mx}), params, prefix + ".conv"));
  return ad::broadcast_mul_channel(f, map);
}

template <class T>
Tensor<T> gam_map(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix) {
  const auto gx = ad::depthwise_conv2d(f, sobel_kernel<T>(false));
  const auto gy = ad::depthwise_conv2d(f, sobel_kernel<T>(true));
  auto branch = [&](const Tensor<T>& g, int first) {
    const std::string q = prefix + ".q";
    auto t = conv(g, params, q + std::to_string(first));
    t = ad::relu(conv(t, params, q + std::to_string(first + 1)));
    return ad::relu(conv(t, params, q + std::to_string(first + 2)));
  };
  const auto both = ad::concat_channels<T>({branch(gx, 1), branch(gy, 4)});
  return ad::sigmoid(conv(both, params, prefix + ".q7"));
}

template <class T>
Tensor<T> gam_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix) {
  return ad::broadcast_mul_channel(f, gam_map(f, params, prefix));
}

template <class T>
Tensor<T> csarb_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix) {
  const auto t = cam_forward(trunk(f, params, prefix), params, prefix + ".cam");
  return ad::add(sam_forward(t, params, prefix + ".sam"), f);
}

template <class T>
Tensor<T> cgarb_forward(const Tensor<T>& f, const ParamSet<T>& params, const std::string& prefix,
                        bool use_gam) {
  auto t = cam_forward(trunk(f, params, prefix), params, prefix + ".cam");
  if (use_gam) t = gam_forward(t, params, prefix + ".gam");
  return ad::add(t, f);
}

template <class T>
Model<T> make_model(NetKind kind, const NetConfig& config, std::uint64_t seed) {
  config.validate();
  Model<T> m;
  m.kind = kind;
  m.config = config;
  Rng rng(seed);
  add_conv(m.params, "head", config.channels, config.input_channels, 3, rng);
  for (int b = 0; b < config.blocks; ++b)
    add_block_params(m.params, "block" + std::to_string(b), config.channels, kind, config.use_gam, rng);
  add_conv(m.params, "tail", config.input_channels, config.channels, 3, rng);
  return m;
}

template <class T>
NetOutput<T> forward(const Model<T>& model, const Tensor<T>& x) {
  require(x.shape().c == model.config.input_channels, Errc::shape_mismatch,
          "network expects " + std::to_string(model.config.input_channels) + " input channels, got " +
              x.shape().str());
  const auto shallow = conv(x, model.params, "head");
  auto f = shallow;
  for (int b = 0; b < model.config.blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    f = model.kind == NetKind::dprnet ? csarb_forward(f, model.params, prefix)
                                      : cgarb_forward(f, model.params, prefix, model.config.use_gam);
  }
  NetOutput<T> out;
  out.rain = conv(ad::add(f, shallow), model.params, "tail");
  out.derained = ad::sub(x, out.rain);
  return out;
}

template <class T>
Tensor<T> images_to_tensor(const std::vector<Image>& images) {
  require(!images.empty(), Errc::invalid_argument, "no images to stack");
  const Image& first = images.front();
  const Shape s{static_cast<int>(images.size()), first.channels(), first.height(), first.width()};
  std::vector<T> data(s.numel());
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    require(img.same_shape(first), Errc::dimension_mismatch, "images in a batch must share one shape");
    const auto src = img.data();
    for (std::size_t i = 0; i < plane; ++i)
      for (int c = 0; c < s.c; ++c)
        data[(n * static_cast<std::size_t>(s.c) + static_cast<std::size_t>(c)) * plane + i] =
            static_cast<T>(src[i * static_cast<std::size_t>(s.c) + static_cast<std::size_t>(c)]);
  }
  return Tensor<T>::from(s, std::move(data));
}

template <class T>
Image tensor_to_image(const Tensor<T>& t, int n) {
  const Shape& s = t.shape();
  require(n >= 0 && n < s.n && (s.c == 1 || s.c == 3), Errc::shape_mismatch,
          "cannot view tensor " + s.str() + " as an image");
  Image img(s.h, s.w, s.c);
  auto dst = img.data();
  const std::size_t plane = s.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < s.c; ++c)
      dst[i * static_cast<std::size_t>(s.c) + static_cast<std::size_t>(c)] = static_cast<float>(
          t.data()[(static_cast<std::size_t>(n) * s.c + static_cast<std::size_t>(c)) * plane + i]);
  return img;
}

std::pair<Image, Image> derain_with_rain(const Model<float>& model, const Image& rainy) {
  require(rainy.channels() == 3, Errc::invalid_argument, "derain expects an RGB image");
  ad::NoGradGuard guard;
  const auto out = forward(model, images_to_tensor<float>({rainy}));
  return {tensor_to_image(out.rain, 0), tensor_to_image(out.derained, 0)};
}

Image derain(const Model<float>& model, const Image& rainy) { return derain_with_rain(model, rainy).second; }

#define IDSR_NETS_INSTANTIATE(T)                                                                          \
  template void add_conv(ParamSet<T>&, const std::string&, int, int, int, Rng&);                         \
  template void add_cam_params(ParamSet<T>&, const std::string&, int, Rng&);                             \
  template void add_sam_params(ParamSet<T>&, const std::string&, Rng&);                                  \
  template void add_gam_params(ParamSet<T>&, const std::string&, int, Rng&);                             \
  template void add_block_params(ParamSet<T>&, const std::string&, int, NetKind, bool, Rng&);            \
  template Tensor<T> cam_forward(const Tensor<T>&, const ParamSet<T>&, const std::string&);              \
  template Tensor<T> sam_forward(const Tensor<T>&, const ParamSet<T>&, const std::string&);              \
  template Tensor<T> gam_map(const Tensor<T>&, const ParamSet<T>&, const std::string&);                  \
  template Tensor<T> gam_forward(const Tensor<T>&, const ParamSet<T>&, const std::string&);              \
  template Tensor<T> csarb_forward(const Tensor<T>&, const ParamSet<T>&, const std::string&);            \
  template Tensor<T> cgarb_forward(const Tensor<T>&, const ParamSet<T>&, const std::string&, bool);      \
  template Model<T> make_model(NetKind, const NetConfig&, std::uint64_t);                                \
  template NetOutput<T> forward(const Model<T>&, const Tensor<T>&);                                      \
  template Tensor<T> images_to_tensor(const std::vector<Image>&);                                        \
  template Image tensor_to_image(const Tensor<T>&, int);

IDSR_NETS_INSTANTIATE(float)
IDSR_NETS_INSTANTIATE(double)

#undef IDSR_NETS_INSTANTIATE

}  // namespace idsr::nets
