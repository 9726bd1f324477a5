#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "idsr/alp.hpp"
#include "idsr/autodiff/adam.hpp"
#include "idsr/dataset.hpp"
#include "idsr/nets.hpp"

namespace idsr::training {

enum class PixelLoss { l1, l2 };

struct LossWeights {
  double lambda_alp = 1.0;
  double lambda_pixel_dpr = 1.0;
  double lambda_pixel_ggir = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
  int epochs = 160;
  double lr0 = 1e-4;
  /// lr0 until `decay_after`, then times `decay_factor` every `decay_every` epochs.
  int decay_after = 80;
  int decay_every = 20;
  double decay_factor = 0.5;
  int batch = 16;
  int patch = 128;
  std::uint64_t seed = 0;
  LossWeights weights;
  /// Pixel term of the DPRNet objective; l2 with lambda_alp = 0 is the
  /// plain-L2 ablation baseline.
  PixelLoss dpr_pixel = PixelLoss::l1;
  /// ALP and gradient losses on luminance; false applies them per channel.
  bool luminance_losses = true;
  bool include_eta0 = false;
  double clip_norm = 1.0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Reduced setting for single-core runs: 64 px patches, batch 8, 16
/// channels, 3 blocks, lr 1e-3. Schedule shape is unchanged.
TrainConfig desk_train_config();
nets::NetConfig desk_net_config();

/// Learning rate in effect during 1-based `epoch`.
double learning_rate(const TrainConfig& cfg, int epoch);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> terms;
};

/// Everything needed to continue training bit-exactly.
struct Checkpoint {
  nets::Model<float> model;
  TrainConfig train;
  ad::AdamState<float> adam;
  int epoch = 0;  ///< completed epochs
  std::string rng_state;
  std::string basis_hash;
  std::vector<EpochLog> history;
};

Checkpoint init_checkpoint(nets::NetKind kind, const nets::NetConfig& net, const TrainConfig& train,
                           const alp::AlpBasis& basis);

struct LossTerms {
  ad::Tensor<float> total;
  std::vector<std::pair<std::string, double>> parts;
};

/// Objective of one batch: DPRNet = lambda_pixel * pixel + lambda_alp * ALP,
/// GGIRNet = grad + lambda_pixel * L1.
LossTerms training_loss(const Checkpoint& ckpt, const ad::Tensor<float>& clean,
                        const ad::Tensor<float>& derained, const alp::AlpBasis& basis);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs epochs ckpt.epoch + 1 .. until_epoch. An epoch is ceil(pairs / batch)
/// iterations of fresh random patches. Throws numeric_failure on a
/// non-finite loss, naming the batch's pairs and crop positions.
void train_until(Checkpoint& ckpt, const PairDataset& ds, const alp::AlpBasis& basis, int until_epoch,
                 const EpochCallback& on_epoch = {});

Checkpoint train_dprnet(const PairDataset& ds, const TrainConfig& cfg, const nets::NetConfig& net,
                        const alp::AlpBasis& basis, const EpochCallback& on_epoch = {});
Checkpoint train_ggirnet(const PairDataset& ds, const TrainConfig& cfg, const nets::NetConfig& net,
                         const alp::AlpBasis& basis, const EpochCallback& on_epoch = {});

/// `epoch,lr,loss,<term>...` with a header row.
std::string loss_log_csv(const std::vector<EpochLog>& history);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian: "IDSRCKPT", u32 version, u64 metadata length, JSON
/// metadata, then raw float32 blobs at the offsets the metadata lists.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes);

}  // namespace idsr::training
