#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idsr/image.hpp"
#include "idsr/sift.hpp"
#include "idsr/training.hpp"

namespace idsr::eval {

struct MetricsRow {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
  int sift_clean = 0;
  int sift_derained = 0;
  int recovered = 0;
  /// Share of ratio-test matches passing the identity-geometry gate; a
  /// proxy for keypoint accuracy.
  double gate_pass_rate = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  MetricsRow mean;  ///< name "mean"; integer columns hold rounded means
  double mean_sift_clean = 0.0;
  double mean_sift_derained = 0.0;
  double mean_recovered = 0.0;

  /// Header plus one line per row; the aggregate line is not included.
  std::string csv() const;
};

/// Row means recomputed from `rows`.
void finalize(MetricsReport& report);

/// One evaluation row. `describe` enables the hybrid pipeline: keypoints
/// from `derained`, descriptors from `describe`.
MetricsRow evaluate_pair(const std::string& name, const Image& derained, const Image& clean,
                         const sift::SiftParams& params, const Image* describe = nullptr);

struct EvalResult {
  MetricsReport derained;
  std::optional<MetricsReport> rainy;  ///< rainy inputs scored as if derained
};

struct EvalOptions {
  std::filesystem::path derained_dir;
  std::filesystem::path clean_dir;
  std::optional<std::filesystem::path> rainy_dir;
  /// GGIRNet outputs for hybrid recovery; same file names.
  std::optional<std::filesystem::path> describe_dir;
  sift::SiftParams sift;
};

/// Pairs matched by file name and evaluated in sorted order. Throws when
/// the directories share no file names or their sets differ.
EvalResult run_eval(const EvalOptions& options);

std::string report_json(const EvalResult& result, const EvalOptions& options);
/// Writes report.csv, report.json and, with a rainy baseline, rainy.csv.
void write_report(const EvalResult& result, const EvalOptions& options, const std::filesystem::path& out_dir);

/// Runs both networks over every image of `rainy_dir`, writing
/// `<out>/dprnet/<name>.png` and `<out>/ggirnet/<name>.png`. Either model
/// may be absent.
void derain_directory(const nets::Model<float>* dprnet, const nets::Model<float>* ggirnet,
                      const std::filesystem::path& rainy_dir, const std::filesystem::path& out_dir);

}  // namespace idsr::eval
