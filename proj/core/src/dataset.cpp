#include "idsr/dataset.hpp"

#include <algorithm>
#include <set>

#include "idsr/error.hpp"
#include "idsr/image_io.hpp"

namespace idsr {

namespace fs = std::filesystem;

bool is_image_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

namespace {

std::set<std::string> image_names(const fs::path& dir) {
  require(fs::is_directory(dir), Errc::missing_file, "not a directory: " + dir.string());
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path()))
      names.insert(entry.path().filename().string());
  return names;
}

}  // namespace

std::vector<std::string> list_pair_names(const fs::path& rainy_dir, const fs::path& clean_dir) {
  const std::set<std::string> rainy = image_names(rainy_dir);
  const std::set<std::string> clean = image_names(clean_dir);
  std::string unmatched;
  for (const auto& n : rainy)
    if (!clean.count(n)) unmatched += " " + n + " (missing from " + clean_dir.string() + ")";
  for (const auto& n : clean)
    if (!rainy.count(n)) unmatched += " " + n + " (missing from " + rainy_dir.string() + ")";
  require(unmatched.empty(), Errc::invalid_argument, "unpaired files:" + unmatched);
  return {rainy.begin(), rainy.end()};
}

void PairDataset::validate() const {
  require(!pairs.empty(), Errc::invalid_argument, "dataset has no pairs");
  require(patch_size > 0, Errc::invalid_argument, "patch size must be positive");
  for (const auto& p : pairs) {
    require(p.rainy.same_shape(p.clean), Errc::dimension_mismatch,
            p.name + ": rainy and clean dimensions differ");
    require(patch_size <= std::min(p.rainy.height(), p.rainy.width()), Errc::invalid_argument,
            p.name + ": patch size " + std::to_string(patch_size) + " exceeds image size");
  }
}

PairDataset load_pair_dataset(const fs::path& root, int patch_size, std::uint64_t seed) {
  PairDataset ds;
  ds.patch_size = patch_size;
  ds.seed = seed;
  for (const auto& name : list_pair_names(root / "rainy", root / "clean"))
    ds.pairs.push_back({name, load_image(root / "rainy" / name), load_image(root / "clean" / name)});
  ds.validate();
  return ds;
}

std::vector<PatchPair> sample_patches(const PairDataset& ds, int batch, Rng& rng) {
  ds.validate();
  require(batch > 0, Errc::invalid_argument, "batch must be positive");
  std::vector<PatchPair> out;
  out.reserve(static_cast<std::size_t>(batch));
  const int p = ds.patch_size;
  for (int b = 0; b < batch; ++b) {
    PatchPair patch;
    patch.pair_index = static_cast<std::size_t>(rng.below(ds.pairs.size()));
    const ImagePair& src = ds.pairs[patch.pair_index];
    patch.top = rng.uniform_int(0, src.rainy.height() - p);
    patch.left = rng.uniform_int(0, src.rainy.width() - p);
    patch.rainy = src.rainy.crop(patch.top, patch.left, p, p);
    patch.clean = src.clean.crop(patch.top, patch.left, p, p);
    out.push_back(std::move(patch));
  }
  return out;
}

}  // namespace idsr
