#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idsr/image.hpp"
#include "idsr/rng.hpp"

namespace idsr {

struct ImagePair {
  std::string name;
  Image rainy;
  Image clean;
};

/// Aligned rainy/clean pairs read from `<root>/rainy` and `<root>/clean`
/// (identical file names). Images are held in memory.
struct PairDataset {
  std::vector<ImagePair> pairs;
  int patch_size = 128;
  std::uint64_t seed = 0;

  bool empty() const noexcept { return pairs.empty(); }
  std::size_t size() const noexcept { return pairs.size(); }
  void validate() const;
};

/// Sorted file names present in both subdirectories. Throws when the two
/// sets differ, listing the unmatched names.
std::vector<std::string> list_pair_names(const std::filesystem::path& rainy_dir,
                                         const std::filesystem::path& clean_dir);

PairDataset load_pair_dataset(const std::filesystem::path& root, int patch_size,
                              std::uint64_t seed = 0);

struct PatchPair {
  std::size_t pair_index = 0;
  int top = 0;
  int left = 0;
  Image rainy;
  Image clean;
};

/// Draws `batch` patches; each picks a pair uniformly and a window
/// uniformly, cutting rainy and clean at the same coordinates.
std::vector<PatchPair> sample_patches(const PairDataset& ds, int batch, Rng& rng);

bool is_image_file(const std::filesystem::path& path);

}  // namespace idsr
