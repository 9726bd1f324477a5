#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "idsr/ablation.hpp"
#include "idsr/alp.hpp"
#include "idsr/dataset.hpp"
#include "idsr/error.hpp"
#include "idsr/evaluation.hpp"
#include "idsr/image_io.hpp"
#include "idsr/rain.hpp"
#include "idsr/render.hpp"
#include "idsr/rng.hpp"
#include "idsr/sift.hpp"
#include "idsr/training.hpp"

namespace idsr::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), Errc::io_failure, "cannot write " + path.string());
  f << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), Errc::missing_file, "cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const alp::AlpBasis& basis_or_default(const std::string& path, alp::AlpBasis& storage) {
  if (path.empty()) return alp::default_basis();
  storage = alp::load_basis(path);
  return storage;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string clean_dir;
  int count = 64;
  int test_count = 16;
  int size = 128;
  std::uint64_t seed = 0;
  RainConfig rain;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--out", a.out, "Dataset root; writes train/ and test/ with rainy/ and clean/")->required();
  app.add_option("--clean-dir", a.clean_dir, "Use these clean images instead of procedural scenes");
  app.add_option("--count", a.count, "Training pairs")->check(CLI::PositiveNumber);
  app.add_option("--test-count", a.test_count, "Held-out pairs")->check(CLI::NonNegativeNumber);
  app.add_option("--size", a.size, "Side of procedural scenes in pixels")->check(CLI::Range(16, 4096));
  app.add_option("--seed", a.seed, "Master seed");
  app.add_option("--streaks", a.rain.streak_count, "Streaks per image");
  app.add_option("--angle", a.rain.angle_deg, "Mean streak angle from vertical (deg)");
  app.add_option("--angle-jitter", a.rain.angle_jitter_deg, "Per-streak angle jitter (deg)");
  app.add_option("--length-min", a.rain.length_px.lo);
  app.add_option("--length-max", a.rain.length_px.hi);
  app.add_option("--width-min", a.rain.width_px.lo);
  app.add_option("--width-max", a.rain.width_px.hi);
  app.add_option("--intensity-min", a.rain.intensity.lo);
  app.add_option("--intensity-max", a.rain.intensity.hi);
  app.add_option("--blur", a.rain.blur_sigma, "Streak blur sigma");
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  a.rain.validate();
  const int total = a.count + a.test_count;
  std::vector<fs::path> sources;
  if (!a.clean_dir.empty()) {
    require(fs::is_directory(a.clean_dir), Errc::missing_file, "no such directory " + a.clean_dir);
    for (const auto& e : fs::directory_iterator(a.clean_dir))
      if (e.is_regular_file() && is_image_file(e.path())) sources.push_back(e.path());
    std::sort(sources.begin(), sources.end());
    require(static_cast<int>(sources.size()) >= total, Errc::invalid_argument,
            "--clean-dir holds " + std::to_string(sources.size()) + " images, need " + std::to_string(total));
  }
  const fs::path root(a.out);
  for (const char* split : {"train", "test"})
    for (const char* kind : {"rainy", "clean"}) fs::create_directories(root / split / kind);

  Rng master(a.seed);
  for (int i = 0; i < total; ++i) {
    const std::uint64_t scene_seed = master.next_u64();
    RainConfig rc = a.rain;
    rc.seed = master.next_u64();
    const Image clean = sources.empty() ? synth_scene(a.size, a.size, scene_seed) : load_image(sources[i]);
    const auto pair = synth_rain(clean, rc);
    const bool train = i < a.count;
    const int index = train ? i : i - a.count;
    char name[32];
    std::snprintf(name, sizeof name, "%04d.png", index);
    const fs::path dir = root / (train ? "train" : "test");
    save_image(clean, dir / "clean" / name);
    save_image(pair.rainy, dir / "rainy" / name);
  }
  out << "wrote " << a.count << " training and " << a.test_count << " test pairs to " << root.string() << "\n";
  return kOk;
}

// ---- shared training flags -----------------------------------------------

struct ModelArgs {
  std::string preset = "desk";
  std::optional<int> epochs, batch, patch, channels, blocks;
  std::optional<double> lr, lambda_alp, lambda_pixel, clip;
  std::optional<std::uint64_t> seed;
  std::string pixel;
  bool per_channel = false;
  bool eta0 = false;
  bool no_gam = false;
  std::string basis;
};

void add_model_flags(CLI::App& app, ModelArgs& a, bool per_net_flags) {
  app.add_option("--preset", a.preset, "Base configuration")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--epochs", a.epochs)->check(CLI::PositiveNumber);
  app.add_option("--batch", a.batch)->check(CLI::PositiveNumber);
  app.add_option("--patch", a.patch)->check(CLI::PositiveNumber);
  app.add_option("--channels", a.channels)->check(CLI::PositiveNumber);
  app.add_option("--blocks", a.blocks)->check(CLI::PositiveNumber);
  app.add_option("--lr", a.lr, "Initial learning rate");
  app.add_option("--seed", a.seed);
  app.add_option("--clip", a.clip, "Global gradient-norm clip");
  app.add_flag("--per-channel", a.per_channel, "Apply ALP and gradient losses per RGB channel");
  app.add_flag("--eta0", a.eta0, "Include eta0 in the ALP loss");
  app.add_option("--basis", a.basis, "ALP basis JSON (default: built-in fit)");
  if (per_net_flags) {
    app.add_option("--lambda-alp", a.lambda_alp, "DPRNet ALP weight");
    app.add_option("--lambda-pixel", a.lambda_pixel, "Pixel-loss weight of the chosen net");
    app.add_option("--pixel", a.pixel, "DPRNet pixel loss")->check(CLI::IsMember({"l1", "l2"}));
    app.add_flag("--no-gam", a.no_gam, "GGIRNet without the GAM stage");
  }
}

std::pair<training::TrainConfig, nets::NetConfig> configs_from(const ModelArgs& a, nets::NetKind kind) {
  training::TrainConfig t = a.preset == "desk" ? training::desk_train_config() : training::TrainConfig{};
  nets::NetConfig n = a.preset == "desk" ? training::desk_net_config() : nets::NetConfig{};
  if (a.epochs) t.epochs = *a.epochs;
  if (a.batch) t.batch = *a.batch;
  if (a.patch) t.patch = *a.patch;
  if (a.lr) t.lr0 = *a.lr;
  if (a.seed) t.seed = *a.seed;
  if (a.clip) t.clip_norm = *a.clip;
  if (a.channels) n.channels = *a.channels;
  if (a.blocks) n.blocks = *a.blocks;
  if (a.lambda_alp) t.weights.lambda_alp = *a.lambda_alp;
  if (a.lambda_pixel) {
    if (kind == nets::NetKind::dprnet)
      t.weights.lambda_pixel_dpr = *a.lambda_pixel;
    else
      t.weights.lambda_pixel_ggir = *a.lambda_pixel;
  }
  if (!a.pixel.empty()) t.dpr_pixel = a.pixel == "l2" ? training::PixelLoss::l2 : training::PixelLoss::l1;
  t.luminance_losses = !a.per_channel;
  t.include_eta0 = a.eta0;
  n.use_gam = !a.no_gam;
  t.validate();
  n.validate();
  return {t, n};
}

std::string describe_epoch(const training::EpochLog& log, int until) {
  std::string s = "epoch " + std::to_string(log.epoch) + "/" + std::to_string(until) + " lr " +
                  fixed(log.lr, 6) + " loss " + fixed(log.loss, 6);
  for (const auto& [name, v] : log.terms) s += " " + name + "=" + fixed(v, 6);
  return s;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string net = "dprnet";
  std::string data;
  std::string out;
  std::string log;
  std::string resume;
  ModelArgs model;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--net", a.net)->check(CLI::IsMember({"dprnet", "ggirnet"}));
  app.add_option("--data", a.data, "Directory with rainy/ and clean/")->required();
  app.add_option("--out", a.out, "Checkpoint to write")->required();
  app.add_option("--log", a.log, "Per-epoch loss CSV (default: <out>.loss.csv)");
  app.add_option("--resume", a.resume, "Continue from this checkpoint up to --epochs");
  add_model_flags(app, a.model, true);
}

int run_train(const CLI::App& app, const TrainArgs& a, std::ostream& out) {
  alp::AlpBasis storage;
  const alp::AlpBasis& basis = basis_or_default(a.model.basis, storage);
  training::Checkpoint ckpt;
  if (!a.resume.empty()) {
    for (const char* flag : {"--preset", "--batch", "--patch", "--channels", "--blocks", "--lr", "--seed", "--clip",
                             "--per-channel", "--eta0", "--lambda-alp", "--lambda-pixel", "--pixel", "--no-gam",
                             "--net"})
      if (app.count(flag) > 0)
        throw CLI::ValidationError(std::string(flag), "cannot be changed when resuming; it comes from the checkpoint");
    ckpt = training::load_checkpoint(a.resume);
    if (a.model.epochs) ckpt.train.epochs = *a.model.epochs;
  } else {
    const auto kind = nets::net_kind_from_string(a.net);
    const auto [t, n] = configs_from(a.model, kind);
    ckpt = training::init_checkpoint(kind, n, t, basis);
  }
  const PairDataset ds = load_pair_dataset(a.data, ckpt.train.patch, ckpt.train.seed);
  fs::path log_path = a.log;
  if (log_path.empty()) log_path = fs::path(a.out).replace_extension(".loss.csv");
  const int until = ckpt.train.epochs;
  out << "training " << nets::to_string(ckpt.model.kind) << " on " << ds.size() << " pairs, "
      << ckpt.model.params.parameter_count() << " parameters, epochs " << ckpt.epoch + 1 << ".." << until << "\n";
  training::train_until(ckpt, ds, basis, until, [&](const training::EpochLog& log) {
    out << describe_epoch(log, until) << "\n" << std::flush;
    write_text(log_path, training::loss_log_csv(ckpt.history));
  });
  write_text(log_path, training::loss_log_csv(ckpt.history));
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  training::save_checkpoint(ckpt, a.out);
  out << "saved " << a.out << "\n";
  return kOk;
}

// ---- derain --------------------------------------------------------------

struct DerainArgs {
  std::string ckpt_dpr, ckpt_ggir, input, out;
};

void add_derain(CLI::App& app, DerainArgs& a) {
  app.add_option("--ckpt-dpr", a.ckpt_dpr, "DPRNet checkpoint");
  app.add_option("--ckpt-ggir", a.ckpt_ggir, "GGIRNet checkpoint");
  app.add_option("--input", a.input, "Directory of rainy images")->required();
  app.add_option("--out", a.out, "Writes <out>/dprnet and <out>/ggirnet")->required();
}

int run_derain(const DerainArgs& a, std::ostream& out) {
  if (a.ckpt_dpr.empty() && a.ckpt_ggir.empty())
    throw CLI::ValidationError("derain", "give --ckpt-dpr, --ckpt-ggir or both");
  std::optional<training::Checkpoint> dpr, ggir;
  if (!a.ckpt_dpr.empty()) dpr = training::load_checkpoint(a.ckpt_dpr);
  if (!a.ckpt_ggir.empty()) ggir = training::load_checkpoint(a.ckpt_ggir);
  require(!dpr || dpr->model.kind == nets::NetKind::dprnet, Errc::invalid_argument,
          a.ckpt_dpr + " is not a DPRNet checkpoint");
  require(!ggir || ggir->model.kind == nets::NetKind::ggirnet, Errc::invalid_argument,
          a.ckpt_ggir + " is not a GGIRNet checkpoint");
  eval::derain_directory(dpr ? &dpr->model : nullptr, ggir ? &ggir->model : nullptr, a.input, a.out);
  out << "derained " << a.input << " -> " << a.out << "\n";
  return kOk;
}

// ---- sift ----------------------------------------------------------------

struct SiftArgs {
  std::string image, describe_image, out, a, b, ransac = "none", overlay;
  double contrast = 0.03, edge = 10.0, ratio = 0.75, tol = 3.0;
  int iters = 1000;
  std::uint64_t seed = 0;
};

void add_sift_thresholds(CLI::App& app, SiftArgs& a) {
  app.add_option("--contrast", a.contrast, "DoG contrast threshold");
  app.add_option("--edge", a.edge, "Edge ratio r");
}

sift::SiftParams sift_params(const SiftArgs& a) {
  sift::SiftParams p;
  p.contrast_threshold = a.contrast;
  p.edge_ratio = a.edge;
  p.ratio = a.ratio;
  return p;
}

sift::Features features_of(const std::string& path, const sift::SiftParams& p) {
  if (fs::path(path).extension() == ".json") return sift::features_from_json(read_text(path));
  return sift::extract_features(luminance(load_image(path)), p);
}

int run_sift_detect(const SiftArgs& a, std::ostream& out) {
  const Image gray = luminance(load_image(a.image));
  sift::Features f;
  f.keypoints = sift::detect(scalespace::build_dog(scalespace::build_scale_stack(gray)), a.contrast, a.edge);
  if (!a.out.empty()) write_text(a.out, sift::features_to_json(f));
  out << f.keypoints.size() << " keypoints\n";
  return kOk;
}

int run_sift_describe(const SiftArgs& a, std::ostream& out) {
  const auto p = sift_params(a);
  const Image gray = luminance(load_image(a.image));
  const auto f = a.describe_image.empty()
                     ? sift::extract_features(gray, p)
                     : sift::extract_features(gray, luminance(load_image(a.describe_image)), p);
  if (!a.out.empty()) write_text(a.out, sift::features_to_json(f));
  out << f.size() << " described keypoints\n";
  return kOk;
}

int run_sift_match(const SiftArgs& a, std::ostream& out) {
  const auto p = sift_params(a);
  const auto fa = features_of(a.a, p);
  const auto fb = features_of(a.b, p);
  auto m = sift::match(fa.descriptors, fb.descriptors, a.ratio);
  if (a.ransac != "none") {
    const auto model = a.ransac == "translation" ? sift::Model::translation : sift::Model::similarity;
    m = sift::verify_ransac(m, fa.keypoints, fb.keypoints, model, a.tol, a.iters, a.seed);
  }
  if (!a.out.empty()) write_text(a.out, sift::matches_to_json(m));
  if (!a.overlay.empty()) {
    require(fs::path(a.a).extension() != ".json" && fs::path(a.b).extension() != ".json", Errc::invalid_argument,
            "--overlay needs image inputs");
    save_image(render_matches(load_image(a.a), load_image(a.b), fa.keypoints, fb.keypoints, m), a.overlay);
  }
  out << fa.size() << " / " << fb.size() << " keypoints, " << m.matches.size() << " matches, "
      << m.inlier_count() << " inliers\n";
  return kOk;
}

// ---- alp -----------------------------------------------------------------

struct AlpArgs {
  std::string out, image, clean, derained, basis;
  std::vector<double> xi{alp::kDefaultXi.begin(), alp::kDefaultXi.end()};
  int half_width = alp::kDefaultHalfWidth;
  int grid_points = alp::kDefaultGridPoints;
  double threshold = alp::kDefaultResponseThreshold;
  bool eta0 = false;
};

int run_alp_fit(const AlpArgs& a, std::ostream& out) {
  if (a.xi.size() != 4) throw CLI::ValidationError("--xi", "expects exactly four scales");
  const std::array<double, 4> xi{a.xi[0], a.xi[1], a.xi[2], a.xi[3]};
  const auto basis = alp::fit_basis(xi, a.half_width, alp::uniform_grid(xi[0], xi[3], a.grid_points));
  alp::save_basis(basis, a.out);
  out << "fit_residual " << fixed(basis.fit_residual, 6) << " (target " << fixed(alp::kTargetFitResidual, 2)
      << ")\n";
  return kOk;
}

int run_alp_detect(const AlpArgs& a, std::ostream& out) {
  alp::AlpBasis storage;
  const auto& basis = basis_or_default(a.basis, storage);
  const auto kps = alp::alp_detect(luminance(load_image(a.image)), basis, a.threshold);
  if (!a.out.empty()) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& k : kps) doc.push_back({{"u", k.u}, {"v", k.v}, {"xi", k.xi_star}, {"response", k.response}});
    write_text(a.out, doc.dump(1) + "\n");
  }
  out << kps.size() << " keypoints\n";
  return kOk;
}

int run_alp_loss(const AlpArgs& a, std::ostream& out) {
  alp::AlpBasis storage;
  const auto& basis = basis_or_default(a.basis, storage);
  const double v = alp::alp_loss(luminance(load_image(a.clean)), luminance(load_image(a.derained)), basis, a.eta0);
  out << fixed(v, 9) << "\n";
  return kOk;
}

// ---- eval / report -------------------------------------------------------

struct EvalArgs {
  std::string derained, clean, rainy, describe, out;
  SiftArgs sift;
};

void add_eval_dirs(CLI::App& app, EvalArgs& a) {
  app.add_option("--derained", a.derained, "Derained images (detection input)")->required();
  app.add_option("--clean", a.clean, "Clean references")->required();
  app.add_option("--describe", a.describe, "GGIRNet outputs for hybrid recovery");
  app.add_option("--out", a.out)->required();
  add_sift_thresholds(app, a.sift);
  app.add_option("--ratio", a.sift.ratio, "Lowe ratio");
}

eval::EvalOptions eval_options(const EvalArgs& a) {
  eval::EvalOptions o;
  o.derained_dir = a.derained;
  o.clean_dir = a.clean;
  if (!a.rainy.empty()) o.rainy_dir = fs::path(a.rainy);
  if (!a.describe.empty()) o.describe_dir = fs::path(a.describe);
  o.sift = sift_params(a.sift);
  return o;
}

void print_summary(const std::string& label, const eval::MetricsReport& r, std::ostream& out) {
  out << label << ": psnr " << fixed(r.mean.psnr_db) << " dB, ssim " << fixed(r.mean.ssim) << ", sift clean "
      << fixed(r.mean_sift_clean, 2) << ", sift " << fixed(r.mean_sift_derained, 2) << ", recovered "
      << fixed(r.mean_recovered, 2) << "\n";
}

int run_eval_cmd(const EvalArgs& a, std::ostream& out) {
  const auto options = eval_options(a);
  const auto result = eval::run_eval(options);
  eval::write_report(result, options, a.out);
  print_summary("derained", result.derained, out);
  if (result.rainy) print_summary("rainy", *result.rainy, out);
  return kOk;
}

int run_report(const EvalArgs& a, std::ostream& out) {
  const auto options = eval_options(a);
  const auto names = list_pair_names(options.derained_dir, options.clean_dir);
  require(!names.empty(), Errc::invalid_argument, "no image pairs to render");
  fs::create_directories(a.out);
  for (const auto& name : names) {
    const Image derained = load_image(options.derained_dir / name);
    const Image clean = load_image(options.clean_dir / name);
    const auto rec = options.describe_dir
                         ? sift::recovered_keypoints(derained, load_image(*options.describe_dir / name), clean,
                                                     options.sift)
                         : sift::recovered_keypoints(derained, clean, options.sift);
    const auto overlay =
        render_matches(clamp01(derained), clean, rec.derained.keypoints, rec.clean.keypoints, rec.matches);
    save_image(overlay, fs::path(a.out) / (fs::path(name).stem().string() + "_matches.png"));
    out << name << ": " << rec.count << " recovered of " << rec.clean_keypoints << "\n";
  }
  return kOk;
}

// ---- ablate --------------------------------------------------------------

struct AblateArgs {
  std::string data, out, save_dir;
  std::string ckpt_a, ckpt_b;
  ModelArgs model;
};

void add_ablate(CLI::App& app, AblateArgs& a, const char* first_ckpt, const char* second_ckpt) {
  app.add_option("--data", a.data, "Dataset root with train/ and test/")->required();
  app.add_option("--out", a.out, "CSV table to write");
  app.add_option("--save-dir", a.save_dir, "Keep trained variants here");
  app.add_option(first_ckpt, a.ckpt_a, "Reuse this checkpoint instead of training");
  app.add_option(second_ckpt, a.ckpt_b, "Reuse this checkpoint instead of training");
  add_model_flags(app, a.model, false);
}

struct VariantSpec {
  std::string label;
  nets::NetKind kind;
  training::TrainConfig train;
  nets::NetConfig net;
  std::string reuse;
  std::string file;
};

training::Checkpoint obtain(const VariantSpec& v, const AblateArgs& a, const PairDataset& train,
                            const alp::AlpBasis& basis, std::ostream& out) {
  if (!v.reuse.empty()) {
    auto c = training::load_checkpoint(v.reuse);
    require(c.model.kind == v.kind, Errc::invalid_argument, v.reuse + " holds the wrong network kind");
    out << v.label << ": reusing " << v.reuse << "\n";
    return c;
  }
  out << v.label << ": training " << nets::to_string(v.kind) << " for " << v.train.epochs << " epochs\n"
      << std::flush;
  auto c = training::init_checkpoint(v.kind, v.net, v.train, basis);
  training::train_until(c, train, basis, v.train.epochs, [&](const training::EpochLog& log) {
    out << "  " << describe_epoch(log, v.train.epochs) << "\n" << std::flush;
  });
  if (!a.save_dir.empty()) {
    fs::create_directories(a.save_dir);
    training::save_checkpoint(c, fs::path(a.save_dir) / v.file);
    write_text(fs::path(a.save_dir) / (fs::path(v.file).stem().string() + ".loss.csv"),
               training::loss_log_csv(c.history));
  }
  return c;
}

enum class Study { one_task, alp_vs_l2, gam };

int run_ablate(Study study, const AblateArgs& a, std::ostream& out) {
  alp::AlpBasis storage;
  const auto& basis = basis_or_default(a.model.basis, storage);
  const auto [dpr_train, net] = configs_from(a.model, nets::NetKind::dprnet);
  const fs::path root(a.data);
  const PairDataset test = load_pair_dataset(root / "test", dpr_train.patch, dpr_train.seed);
  const bool needs_training = a.ckpt_a.empty() || a.ckpt_b.empty();
  const PairDataset train =
      needs_training ? load_pair_dataset(root / "train", dpr_train.patch, dpr_train.seed) : PairDataset{};

  std::vector<VariantSpec> specs;
  ablation::TableKind kind = ablation::TableKind::gaussian;
  switch (study) {
    case Study::one_task:
      specs.push_back({"dprnet", nets::NetKind::dprnet, dpr_train, net, a.ckpt_a, "dprnet.ckpt"});
      specs.push_back({"ggirnet", nets::NetKind::ggirnet, dpr_train, net, a.ckpt_b, "ggirnet.ckpt"});
      break;
    case Study::alp_vs_l2: {
      kind = ablation::TableKind::dog;
      auto l2 = dpr_train;
      l2.weights.lambda_alp = 0.0;
      l2.dpr_pixel = training::PixelLoss::l2;
      specs.push_back({"l2", nets::NetKind::dprnet, l2, net, a.ckpt_a, "dprnet_l2.ckpt"});
      specs.push_back({"alp", nets::NetKind::dprnet, dpr_train, net, a.ckpt_b, "dprnet_alp.ckpt"});
      break;
    }
    case Study::gam: {
      auto no_gam = net;
      no_gam.use_gam = false;
      specs.push_back({"no_gam", nets::NetKind::ggirnet, dpr_train, no_gam, a.ckpt_a, "ggirnet_nogam.ckpt"});
      specs.push_back({"gam", nets::NetKind::ggirnet, dpr_train, net, a.ckpt_b, "ggirnet_gam.ckpt"});
      break;
    }
  }
  std::vector<training::Checkpoint> models;
  for (const auto& s : specs) models.push_back(obtain(s, a, train, basis, out));

  std::vector<ablation::Variant> variants;
  switch (study) {
    case Study::one_task:
      variants.push_back({"one_task", &models[0].model, &models[0].model});
      variants.push_back({"two_network", &models[0].model, &models[1].model});
      break;
    case Study::alp_vs_l2:
      variants.push_back({"l2_loss", &models[0].model, &models[0].model});
      variants.push_back({"alp_loss", &models[1].model, &models[1].model});
      break;
    case Study::gam:
      variants.push_back({"without_gam", &models[0].model, &models[0].model});
      variants.push_back({"with_gam", &models[1].model, &models[1].model});
      break;
  }
  const auto table = ablation::compare(kind, variants, test);
  const std::string csv = table.csv();
  if (!a.out.empty()) write_text(a.out, csv);
  out << csv;
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image deraining for SIFT keypoint recovery", "idsr"};
  app.require_subcommand(1);
  app.fallthrough(false);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic rainy/clean dataset");
  add_synth(*synth_cmd, synth);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train DPRNet or GGIRNet");
  add_train(*train_cmd, train);

  DerainArgs derain;
  auto* derain_cmd = app.add_subcommand("derain", "Run trained networks over a directory");
  add_derain(*derain_cmd, derain);

  SiftArgs sift_args;
  auto* sift_cmd = app.add_subcommand("sift", "SIFT detection, description and matching");
  sift_cmd->require_subcommand(1);
  auto* sift_detect = sift_cmd->add_subcommand("detect", "DoG extrema");
  sift_detect->add_option("--image", sift_args.image)->required();
  sift_detect->add_option("--out", sift_args.out, "Keypoint JSON");
  add_sift_thresholds(*sift_detect, sift_args);
  auto* sift_describe = sift_cmd->add_subcommand("describe", "Keypoints with orientations and descriptors");
  sift_describe->add_option("--image", sift_args.image)->required();
  sift_describe->add_option("--describe-image", sift_args.describe_image,
                            "Take gradients from this image instead");
  sift_describe->add_option("--out", sift_args.out, "Feature JSON");
  add_sift_thresholds(*sift_describe, sift_args);
  auto* sift_match = sift_cmd->add_subcommand("match", "Match two images or feature files");
  sift_match->add_option("--a", sift_args.a, "Image or feature JSON")->required();
  sift_match->add_option("--b", sift_args.b, "Image or feature JSON")->required();
  sift_match->add_option("--ratio", sift_args.ratio);
  sift_match->add_option("--ransac", sift_args.ransac)->check(CLI::IsMember({"none", "translation", "similarity"}));
  sift_match->add_option("--tol", sift_args.tol, "RANSAC inlier tolerance (px)");
  sift_match->add_option("--iters", sift_args.iters)->check(CLI::PositiveNumber);
  sift_match->add_option("--seed", sift_args.seed);
  sift_match->add_option("--out", sift_args.out, "Match JSON");
  sift_match->add_option("--overlay", sift_args.overlay, "Render matches to this PNG");
  add_sift_thresholds(*sift_match, sift_args);

  AlpArgs alp_args;
  auto* alp_cmd = app.add_subcommand("alp", "Approximated LoG tools");
  alp_cmd->require_subcommand(1);
  auto* alp_fit = alp_cmd->add_subcommand("fit-basis", "Fit the cubic scale basis");
  alp_fit->add_option("--out", alp_args.out)->required();
  alp_fit->add_option("--xi", alp_args.xi, "Four basis scales")->expected(4);
  alp_fit->add_option("--half-width", alp_args.half_width)->check(CLI::PositiveNumber);
  alp_fit->add_option("--grid-points", alp_args.grid_points)->check(CLI::Range(4, 10000));
  auto* alp_det = alp_cmd->add_subcommand("detect", "Scale-space extrema from the SSR");
  alp_det->add_option("--image", alp_args.image)->required();
  alp_det->add_option("--basis", alp_args.basis);
  alp_det->add_option("--threshold", alp_args.threshold);
  alp_det->add_option("--out", alp_args.out, "Keypoint JSON");
  auto* alp_loss_cmd = alp_cmd->add_subcommand("loss", "ALP loss between two images");
  alp_loss_cmd->add_option("--clean", alp_args.clean)->required();
  alp_loss_cmd->add_option("--derained", alp_args.derained)->required();
  alp_loss_cmd->add_option("--basis", alp_args.basis);
  alp_loss_cmd->add_flag("--eta0", alp_args.eta0);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM and recovered SIFT keypoints");
  add_eval_dirs(*eval_cmd, eval_args);
  eval_cmd->add_option("--rainy", eval_args.rainy, "Rainy inputs for the baseline row set");

  EvalArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Render recovered-match overlays");
  add_eval_dirs(*report_cmd, report_args);

  auto* ablate_cmd = app.add_subcommand("ablate", "Ablation tables");
  ablate_cmd->require_subcommand(1);
  AblateArgs one_task, alp_l2, gam;
  add_ablate(*ablate_cmd->add_subcommand("one-task", "One-task DPRNet vs two-network Gaussian MSE"), one_task,
             "--ckpt-dpr", "--ckpt-ggir");
  add_ablate(*ablate_cmd->add_subcommand("alp-vs-l2", "L2- vs ALP-trained DPRNet DoG MSE"), alp_l2, "--ckpt-l2",
             "--ckpt-alp");
  add_ablate(*ablate_cmd->add_subcommand("gam", "GGIRNet with and without GAM, Gaussian MSE"), gam,
             "--ckpt-nogam", "--ckpt-gam");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth, out);
    if (*train_cmd) return run_train(*train_cmd, train, out);
    if (*derain_cmd) return run_derain(derain, out);
    if (*sift_detect) return run_sift_detect(sift_args, out);
    if (*sift_describe) return run_sift_describe(sift_args, out);
    if (*sift_match) return run_sift_match(sift_args, out);
    if (*alp_fit) return run_alp_fit(alp_args, out);
    if (*alp_det) return run_alp_detect(alp_args, out);
    if (*alp_loss_cmd) return run_alp_loss(alp_args, out);
    if (*eval_cmd) return run_eval_cmd(eval_args, out);
    if (*report_cmd) return run_report(report_args, out);
    if (ablate_cmd->got_subcommand("one-task")) return run_ablate(Study::one_task, one_task, out);
    if (ablate_cmd->got_subcommand("alp-vs-l2")) return run_ablate(Study::alp_vs_l2, alp_l2, out);
    if (ablate_cmd->got_subcommand("gam")) return run_ablate(Study::gam, gam, out);
  } catch (const CLI::ValidationError& e) {
    err << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  err << app.help();
  return kUsage;
}

}  // namespace idsr::cli
