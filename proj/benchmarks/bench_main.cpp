#include <benchmark/benchmark.h>

#include "idsr/alp.hpp"
#include "idsr/autodiff/ops.hpp"
#include "idsr/nets.hpp"
#include "idsr/rain.hpp"
#include "idsr/scalespace.hpp"
#include "idsr/sift.hpp"
#include "idsr/training.hpp"

namespace {

using namespace idsr;

Image gray_scene(int n) { return luminance(synth_scene(n, n, 3)); }

ad::Tensor<float> random_tensor(ad::Shape s, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<float> v(s.numel());
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return ad::Tensor<float>::from(s, std::move(v), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const auto x = random_tensor({8, c, 64, 64}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({1, c, 1, 1}, 3);
  ad::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ad::conv2d(x, w, b).data().data());
  state.SetItemsProcessed(state.iterations() * 8 * 64 * 64);
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  auto x = random_tensor({8, c, 64, 64}, 1, true);
  auto w = random_tensor({c, c, 3, 3}, 2, true);
  auto b = random_tensor({1, c, 1, 1}, 3, true);
  for (auto _ : state) ad::backward(ad::sum(ad::conv2d(x, w, b)));
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GaussianBlur(benchmark::State& state) {
  const Image img = gray_scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scalespace::gaussian_blur(img, 3.2).data().data());
}
BENCHMARK(BM_GaussianBlur)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_EtaMaps(benchmark::State& state) {
  const Image img = gray_scene(static_cast<int>(state.range(0)));
  const auto& basis = alp::default_basis();
  for (auto _ : state) benchmark::DoNotOptimize(alp::eta_field(img, basis).eta[0].data());
}
BENCHMARK(BM_EtaMaps)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitBasis(benchmark::State& state) {
  const auto grid = alp::uniform_grid(1.6, 4.5255, 33);
  for (auto _ : state) benchmark::DoNotOptimize(alp::fit_basis(alp::kDefaultXi, 14, grid).fit_residual);
}
BENCHMARK(BM_FitBasis)->Unit(benchmark::kMillisecond);

void BM_SiftExtract(benchmark::State& state) {
  const Image img = gray_scene(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sift::extract_features(img).size());
}
BENCHMARK(BM_SiftExtract)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_RecoveredKeypoints(benchmark::State& state) {
  const Image clean = synth_scene(128, 128, 5);
  const Image rainy = synth_rain(clean, RainConfig{}).rainy;
  for (auto _ : state) benchmark::DoNotOptimize(sift::recovered_keypoints(rainy, clean).count);
}
BENCHMARK(BM_RecoveredKeypoints)->Unit(benchmark::kMillisecond);

void BM_DeskTrainingStep(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? nets::NetKind::dprnet : nets::NetKind::ggirnet;
  PairDataset ds;
  ds.patch_size = 64;
  for (std::uint64_t i = 0; i < 8; ++i) {
    const Image clean = synth_scene(128, 128, 20 + i);
    RainConfig rain;
    rain.seed = i;
    ds.pairs.push_back({std::to_string(i) + ".png", synth_rain(clean, rain).rainy, clean});
  }
  auto cfg = training::desk_train_config();
  const auto& basis = alp::default_basis();
  auto ckpt = training::init_checkpoint(kind, training::desk_net_config(), cfg, basis);
  int epoch = 0;
  // one epoch over 8 pairs at batch 8 is a single optimizer step
  for (auto _ : state) training::train_until(ckpt, ds, basis, ++epoch, {});
  state.SetLabel(nets::to_string(kind));
}
BENCHMARK(BM_DeskTrainingStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
