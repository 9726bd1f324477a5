#include "idsr/training.hpp"

#include <cmath>
#include <sstream>

#include "idsr/error.hpp"
#include "idsr/losses.hpp"

namespace idsr::training {

using ad::Tensor;

void TrainConfig::validate() const {
  require(epochs >= 1, Errc::invalid_argument, "epochs must be >= 1");
  require(lr0 > 0.0 && std::isfinite(lr0), Errc::invalid_argument, "lr0 must be positive");
  require(decay_after >= 0 && decay_every >= 1, Errc::invalid_argument, "invalid decay schedule");
  require(decay_factor > 0.0 && decay_factor <= 1.0, Errc::invalid_argument, "decay factor must lie in (0, 1]");
  require(batch >= 1, Errc::invalid_argument, "batch must be >= 1");
  require(patch >= 8, Errc::invalid_argument, "patch must be >= 8");
  require(weights.lambda_alp >= 0.0 && weights.lambda_pixel_dpr >= 0.0 && weights.lambda_pixel_ggir >= 0.0,
          Errc::invalid_argument, "loss weights must be non-negative");
  require(clip_norm > 0.0, Errc::invalid_argument, "clip norm must be positive");
}

TrainConfig desk_train_config() {
  TrainConfig cfg;
  cfg.lr0 = 1e-3;
  cfg.batch = 8;
  cfg.patch = 64;
  return cfg;
}

nets::NetConfig desk_net_config() {
  nets::NetConfig cfg;
  cfg.blocks = 3;
  cfg.channels = 16;
  return cfg;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch <= cfg.decay_after) return cfg.lr0;
  const int halvings = (epoch - cfg.decay_after - 1) / cfg.decay_every + 1;
  return cfg.lr0 * std::pow(cfg.decay_factor, halvings);
}

Checkpoint init_checkpoint(nets::NetKind kind, const nets::NetConfig& net, const TrainConfig& train,
                           const alp::AlpBasis& basis) {
  train.validate();
  Checkpoint ckpt;
  ckpt.model = nets::make_model<float>(kind, net, train.seed);
  ckpt.train = train;
  ckpt.adam.config.lr = train.lr0;
  ckpt.adam.init(ckpt.model.params);
  ckpt.rng_state = Rng(train.seed ^ 0x5eedba7c4ULL).state();
  ckpt.basis_hash = alp::basis_hash(basis);
  return ckpt;
}

LossTerms training_loss(const Checkpoint& ckpt, const Tensor<float>& clean, const Tensor<float>& derained,
                        const alp::AlpBasis& basis) {
  const TrainConfig& cfg = ckpt.train;
  const auto lum_c = cfg.luminance_losses ? luminance(clean) : clean;
  const auto lum_d = cfg.luminance_losses ? luminance(derained) : derained;
  LossTerms out;
  Tensor<float> total;
  auto accumulate = [&](const std::string& name, const Tensor<float>& term, double weight) {
    out.parts.emplace_back(name, static_cast<double>(term.item()));
    if (weight == 0.0) return;
    const auto weighted = weight == 1.0 ? term : ad::mul_scalar(term, static_cast<float>(weight));
    total = total.defined() ? ad::add(total, weighted) : weighted;
  };
  if (ckpt.model.kind == nets::NetKind::dprnet) {
    const double wp = cfg.weights.lambda_pixel_dpr;
    if (wp > 0.0) {
      if (cfg.dpr_pixel == PixelLoss::l1)
        accumulate("pixel_l1", ad::l1_loss(derained, clean), wp);
      else
        accumulate("pixel_l2", ad::mse_loss(derained, clean), wp);
    }
    if (cfg.weights.lambda_alp > 0.0)
      accumulate("alp", alp_loss_diff(lum_c, lum_d, basis, cfg.include_eta0), cfg.weights.lambda_alp);
  } else {
    accumulate("grad", grad_loss_diff(lum_c, lum_d), 1.0);
    if (cfg.weights.lambda_pixel_ggir > 0.0)
      accumulate("pixel_l1", ad::l1_loss(derained, clean), cfg.weights.lambda_pixel_ggir);
  }
  require(total.defined(), Errc::invalid_argument, "every loss weight is zero");
  out.total = total;
  return out;
}

void train_until(Checkpoint& ckpt, const PairDataset& ds, const alp::AlpBasis& basis, int until_epoch,
                 const EpochCallback& on_epoch) {
  require(!ds.empty(), Errc::invalid_argument, "training dataset is empty");
  require(ds.patch_size == ckpt.train.patch, Errc::invalid_argument,
          "dataset patch size " + std::to_string(ds.patch_size) + " differs from training patch " +
              std::to_string(ckpt.train.patch));
  require(ckpt.basis_hash == alp::basis_hash(basis), Errc::invalid_argument,
          "checkpoint was trained with a different ALP basis");
  ckpt.train.validate();
  ds.validate();

  Rng rng;
  rng.set_state(ckpt.rng_state);
  const int batch = ckpt.train.batch;
  const int iters = static_cast<int>((ds.size() + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));

  for (int epoch = ckpt.epoch + 1; epoch <= until_epoch; ++epoch) {
    ckpt.adam.config.lr = learning_rate(ckpt.train, epoch);
    EpochLog log;
    log.epoch = epoch;
    log.lr = ckpt.adam.config.lr;
    for (int it = 0; it < iters; ++it) {
      const auto patches = sample_patches(ds, batch, rng);
      std::vector<Image> rainy, clean;
      for (const auto& p : patches) {
        rainy.push_back(p.rainy);
        clean.push_back(p.clean);
      }
      const auto x = nets::images_to_tensor<float>(rainy);
      const auto y = nets::images_to_tensor<float>(clean);
      const auto out = nets::forward(ckpt.model, x);
      const auto loss = training_loss(ckpt, y, out.derained, basis);
      const float value = loss.total.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", iteration " << it << "; batch:";
        for (const auto& p : patches)
          msg << ' ' << ds.pairs[p.pair_index].name << "@(" << p.top << ',' << p.left << ')';
        fail(Errc::numeric_failure, msg.str());
      }
      ckpt.model.params.zero_grad();
      ad::backward(loss.total);
      ckpt.model.params.clip_grad_norm(ckpt.train.clip_norm);
      ad::adam_step(ckpt.model.params, ckpt.adam);

      log.loss += value;
      if (log.terms.empty())
        log.terms = loss.parts;
      else
        for (std::size_t k = 0; k < loss.parts.size(); ++k) log.terms[k].second += loss.parts[k].second;
    }
    log.loss /= iters;
    for (auto& t : log.terms) t.second /= iters;
    ckpt.epoch = epoch;
    ckpt.rng_state = rng.state();
    ckpt.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
}

Checkpoint train_dprnet(const PairDataset& ds, const TrainConfig& cfg, const nets::NetConfig& net,
                        const alp::AlpBasis& basis, const EpochCallback& on_epoch) {
  Checkpoint ckpt = init_checkpoint(nets::NetKind::dprnet, net, cfg, basis);
  train_until(ckpt, ds, basis, cfg.epochs, on_epoch);
  return ckpt;
}

Checkpoint train_ggirnet(const PairDataset& ds, const TrainConfig& cfg, const nets::NetConfig& net,
                         const alp::AlpBasis& basis, const EpochCallback& on_epoch) {
  Checkpoint ckpt = init_checkpoint(nets::NetKind::ggirnet, net, cfg, basis);
  train_until(ckpt, ds, basis, cfg.epochs, on_epoch);
  return ckpt;
}

std::string loss_log_csv(const std::vector<EpochLog>& history) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,lr,loss";
  if (!history.empty())
    for (const auto& t : history.front().terms) out << ',' << t.first;
  out << '\n';
  for (const auto& h : history) {
    out << h.epoch << ',' << h.lr << ',' << h.loss;
    for (const auto& t : h.terms) out << ',' << t.second;
    out << '\n';
  }
  return out.str();
}

}  // namespace idsr::training
