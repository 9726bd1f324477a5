#include "idsr/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idsr/dataset.hpp"
#include "idsr/error.hpp"
#include "idsr/image_io.hpp"
#include "idsr/metrics.hpp"

namespace idsr::eval {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io_failure, "cannot write " + path.string());
  out << text;
}

nlohmann::ordered_json row_json(const MetricsRow& r) {
  return {{"name", r.name},
          {"psnr_db", std::stod(fmt(r.psnr_db))},
          {"ssim", std::stod(fmt(r.ssim))},
          {"sift_clean", r.sift_clean},
          {"sift_derained", r.sift_derained},
          {"recovered", r.recovered},
          {"gate_pass_rate", std::stod(fmt(r.gate_pass_rate))}};
}

nlohmann::ordered_json report_block(const MetricsReport& rep) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : rep.rows) rows.push_back(row_json(r));
  return {{"rows", rows},
          {"mean",
           {{"psnr_db", std::stod(fmt(rep.mean.psnr_db))},
            {"ssim", std::stod(fmt(rep.mean.ssim))},
            {"sift_clean", std::stod(fmt(rep.mean_sift_clean))},
            {"sift_derained", std::stod(fmt(rep.mean_sift_derained))},
            {"recovered", std::stod(fmt(rep.mean_recovered))},
            {"gate_pass_rate", std::stod(fmt(rep.mean.gate_pass_rate))}}}};
}

MetricsReport evaluate_dirs(const std::vector<std::string>& names, const fs::path& derained_dir,
                            const fs::path& clean_dir, const std::optional<fs::path>& describe_dir,
                            const sift::SiftParams& params) {
  MetricsReport rep;
  for (const auto& name : names) {
    const Image derained = load_image(derained_dir / name);
    const Image clean = load_image(clean_dir / name);
    if (describe_dir) {
      const Image describe = load_image(*describe_dir / name);
      rep.rows.push_back(evaluate_pair(name, derained, clean, params, &describe));
    } else {
      rep.rows.push_back(evaluate_pair(name, derained, clean, params));
    }
  }
  finalize(rep);
  return rep;
}

}  // namespace

std::string MetricsReport::csv() const {
  std::string out = "name,psnr_db,ssim,sift_clean,sift_derained,recovered,gate_pass_rate\n";
  for (const auto& r : rows)
    out += r.name + "," + fmt(r.psnr_db) + "," + fmt(r.ssim) + "," + std::to_string(r.sift_clean) + "," +
           std::to_string(r.sift_derained) + "," + std::to_string(r.recovered) + "," + fmt(r.gate_pass_rate) + "\n";
  return out;
}

void finalize(MetricsReport& report) {
  MetricsRow m;
  m.name = "mean";
  report.mean_sift_clean = report.mean_sift_derained = report.mean_recovered = 0.0;
  const double n = static_cast<double>(report.rows.size());
  if (n > 0) {
    for (const auto& r : report.rows) {
      m.psnr_db += r.psnr_db;
      m.ssim += r.ssim;
      m.gate_pass_rate += r.gate_pass_rate;
      report.mean_sift_clean += r.sift_clean;
      report.mean_sift_derained += r.sift_derained;
      report.mean_recovered += r.recovered;
    }
    m.psnr_db /= n;
    m.ssim /= n;
    m.gate_pass_rate /= n;
    report.mean_sift_clean /= n;
    report.mean_sift_derained /= n;
    report.mean_recovered /= n;
  }
  m.sift_clean = static_cast<int>(std::lround(report.mean_sift_clean));
  m.sift_derained = static_cast<int>(std::lround(report.mean_sift_derained));
  m.recovered = static_cast<int>(std::lround(report.mean_recovered));
  report.mean = m;
}

MetricsRow evaluate_pair(const std::string& name, const Image& derained, const Image& clean,
                         const sift::SiftParams& params, const Image* describe) {
  require(derained.same_shape(clean), Errc::dimension_mismatch, name + ": derained and clean differ in shape");
  MetricsRow row;
  row.name = name;
  row.psnr_db = psnr(derained, clean);
  row.ssim = ssim(derained, clean);
  const auto rec = describe ? sift::recovered_keypoints(derained, *describe, clean, params)
                            : sift::recovered_keypoints(derained, clean, params);
  row.sift_clean = rec.clean_keypoints;
  row.sift_derained = rec.derained_keypoints;
  row.recovered = rec.count;
  row.gate_pass_rate = rec.gate_pass_rate();
  return row;
}

EvalResult run_eval(const EvalOptions& options) {
  const auto names = list_pair_names(options.derained_dir, options.clean_dir);
  require(!names.empty(), Errc::invalid_argument,
          "no image pairs: " + options.derained_dir.string() + " and " + options.clean_dir.string() +
              " share zero file names (0 pairs)");
  if (options.describe_dir) list_pair_names(*options.describe_dir, options.clean_dir);
  EvalResult result;
  result.derained = evaluate_dirs(names, options.derained_dir, options.clean_dir, options.describe_dir, options.sift);
  if (options.rainy_dir) {
    const auto rainy_names = list_pair_names(*options.rainy_dir, options.clean_dir);
    require(rainy_names == names, Errc::invalid_argument, "rainy directory does not cover the evaluated pairs");
    result.rainy = evaluate_dirs(names, *options.rainy_dir, options.clean_dir, std::nullopt, options.sift);
  }
  return result;
}

std::string report_json(const EvalResult& result, const EvalOptions& options) {
  nlohmann::ordered_json doc;
  doc["config"] = {{"derained_dir", options.derained_dir.string()},
                   {"clean_dir", options.clean_dir.string()},
                   {"rainy_dir", options.rainy_dir ? options.rainy_dir->string() : ""},
                   {"describe_dir", options.describe_dir ? options.describe_dir->string() : ""},
                   {"mode", options.describe_dir ? "hybrid" : "single"},
                   {"contrast_threshold", options.sift.contrast_threshold},
                   {"edge_ratio", options.sift.edge_ratio},
                   {"ratio", options.sift.ratio},
                   {"gate_px", options.sift.gate_px},
                   {"gate_scale", options.sift.gate_scale}};
  doc["derained"] = report_block(result.derained);
  if (result.rainy) doc["rainy"] = report_block(*result.rainy);
  return doc.dump(2) + "\n";
}

void write_report(const EvalResult& result, const EvalOptions& options, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.csv", result.derained.csv());
  if (result.rainy) write_text(out_dir / "rainy.csv", result.rainy->csv());
  write_text(out_dir / "report.json", report_json(result, options));
}

void derain_directory(const nets::Model<float>* dprnet, const nets::Model<float>* ggirnet,
                      const fs::path& rainy_dir, const fs::path& out_dir) {
  require(dprnet || ggirnet, Errc::invalid_argument, "derain needs at least one checkpoint");
  require(fs::is_directory(rainy_dir), Errc::missing_file, "no such directory " + rainy_dir.string());
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(rainy_dir))
    if (e.is_regular_file() && is_image_file(e.path())) inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());
  require(!inputs.empty(), Errc::invalid_argument, "no images in " + rainy_dir.string());
  for (const auto* m : {dprnet, ggirnet})
    if (m) fs::create_directories(out_dir / nets::to_string(m->kind));
  for (const auto& path : inputs) {
    const Image rainy = load_image(path);
    const std::string name = path.stem().string() + ".png";
    for (const auto* m : {dprnet, ggirnet})
      if (m) save_image(nets::derain(*m, rainy), out_dir / nets::to_string(m->kind) / name);
  }
}

}  // namespace idsr::eval
