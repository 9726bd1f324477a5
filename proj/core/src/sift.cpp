#include "idsr/sift.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "idsr/error.hpp"
#include "idsr/rng.hpp"

namespace idsr::sift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kOriBins = 36;
constexpr double kOriWindowFactor = 1.5;
constexpr double kOriPeakRatio = 0.8;
constexpr int kDescCells = 4;
constexpr int kDescBins = 8;
constexpr double kDescCellFactor = 3.0;
constexpr float kDescClamp = 0.2f;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

struct DogView {
  const scalespace::DoGStack& dog;
  int h, w;
  double at(int j, int y, int x) const { return dog.diffs[static_cast<std::size_t>(j)].at(y, x); }
};

bool is_extremum(const DogView& d, int j, int y, int x) {
  const double v = d.at(j, y, x);
  bool is_max = true, is_min = true;
  for (int l = std::max(0, j - 1); l <= std::min(3, j + 1); ++l)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (l == j && dy == 0 && dx == 0) continue;
        const double n = d.at(l, y + dy, x + dx);
        if (n >= v) is_max = false;
        if (n <= v) is_min = false;
        if (!is_max && !is_min) return false;
      }
  return is_max || is_min;
}

bool window_inside(double x, double y, double radius, int h, int w) {
  const int xi = static_cast<int>(std::lround(x)), yi = static_cast<int>(std::lround(y));
  const int r = static_cast<int>(std::ceil(radius));
  return xi - r >= 0 && yi - r >= 0 && xi + r <= w - 1 && yi + r <= h - 1;
}

bool keypoint_less(const Keypoint& a, const Keypoint& b) {
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  if (a.scale != b.scale) return a.scale < b.scale;
  return a.orientation < b.orientation;
}

double squared_distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

std::size_t MatchSet::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

double dog_level_scale(const scalespace::DoGStack& dog, double level) {
  std::array<double, 4> logs{};
  for (std::size_t j = 0; j < 4; ++j)
    logs[j] = 0.5 * (std::log(dog.scale_pairs[j].first) + std::log(dog.scale_pairs[j].second));
  const int j0 = std::clamp(static_cast<int>(std::floor(level)), 0, 2);
  const double t = level - j0;
  const auto i = static_cast<std::size_t>(j0);
  return std::exp((1.0 - t) * logs[i] + t * logs[i + 1]);
}

std::vector<Keypoint> detect(const scalespace::DoGStack& dog, double contrast_threshold,
                             double edge_ratio) {
  const int h = dog.diffs[0].height(), w = dog.diffs[0].width();
  for (const Image& d : dog.diffs)
    require(d.channels() == 1 && d.height() == h && d.width() == w, Errc::dimension_mismatch,
            "DoG levels must be grayscale and equally sized");
  std::vector<Keypoint> out;
  if (h < 3 || w < 3) return out;
  const DogView d{dog, h, w};
  const double lo_scale = dog.scale_pairs[0].first, hi_scale = dog.scale_pairs[3].second;
  const double edge_limit = (edge_ratio + 1.0) * (edge_ratio + 1.0) / edge_ratio;

  for (int j = 0; j < 4; ++j) {
    const bool interior = j == 1 || j == 2;
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        const double v = d.at(j, y, x);
        if (std::abs(v) < 0.5 * contrast_threshold) continue;
        if (!is_extremum(d, j, y, x)) continue;

        const double dx = 0.5 * (d.at(j, y, x + 1) - d.at(j, y, x - 1));
        const double dy = 0.5 * (d.at(j, y + 1, x) - d.at(j, y - 1, x));
        const double dxx = d.at(j, y, x + 1) + d.at(j, y, x - 1) - 2.0 * v;
        const double dyy = d.at(j, y + 1, x) + d.at(j, y - 1, x) - 2.0 * v;
        const double dxy = 0.25 * (d.at(j, y + 1, x + 1) - d.at(j, y + 1, x - 1) -
                                   d.at(j, y - 1, x + 1) + d.at(j, y - 1, x - 1));
        Eigen::Vector3d offset = Eigen::Vector3d::Zero();
        double contrast = 0.0;
        if (interior) {
          const double ds = 0.5 * (d.at(j + 1, y, x) - d.at(j - 1, y, x));
          const double dss = d.at(j + 1, y, x) + d.at(j - 1, y, x) - 2.0 * v;
          const double dxs = 0.25 * (d.at(j + 1, y, x + 1) - d.at(j + 1, y, x - 1) -
                                     d.at(j - 1, y, x + 1) + d.at(j - 1, y, x - 1));
          const double dys = 0.25 * (d.at(j + 1, y + 1, x) - d.at(j + 1, y - 1, x) -
                                     d.at(j - 1, y + 1, x) + d.at(j - 1, y - 1, x));
          Eigen::Matrix3d hess;
          hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
          const Eigen::Vector3d g(dx, dy, ds);
          if (std::abs(hess.determinant()) < 1e-12) continue;
          offset = -hess.partialPivLu().solve(g);
          contrast = v + 0.5 * g.dot(offset);
        } else {
          Eigen::Matrix2d hess;
          hess << dxx, dxy, dxy, dyy;
          const Eigen::Vector2d g(dx, dy);
          if (std::abs(hess.determinant()) < 1e-12) continue;
          const Eigen::Vector2d o = -hess.partialPivLu().solve(g);
          offset << o[0], o[1], 0.0;
          contrast = v + 0.5 * g.dot(o);
        }
        if (!offset.allFinite() || offset.cwiseAbs().maxCoeff() > 1.0) continue;
        if (std::abs(contrast) < contrast_threshold) continue;

        const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
        if (det <= 0.0 || tr * tr >= edge_limit * det) continue;

        Keypoint kp;
        kp.x = std::clamp(x + offset[0], 0.0, static_cast<double>(w - 1));
        kp.y = std::clamp(y + offset[1], 0.0, static_cast<double>(h - 1));
        kp.scale = std::clamp(dog_level_scale(dog, j + offset[2]), lo_scale, hi_scale);
        kp.response = contrast;
        out.push_back(kp);
      }
  }
  std::sort(out.begin(), out.end(), keypoint_less);
  return out;
}

GradientCache::GradientCache(const scalespace::ScaleStack& stack) : scales(stack.scales) {
  for (std::size_t j = 0; j < 5; ++j) fields[j] = scalespace::sobel_gradients(stack.levels[j]);
}

int GradientCache::nearest_level(double s) const {
  int best = 0;
  double best_d = std::abs(std::log(s / scales[0]));
  for (int j = 1; j < 5; ++j) {
    const double dist = std::abs(std::log(s / scales[static_cast<std::size_t>(j)]));
    if (dist < best_d) {
      best_d = dist;
      best = j;
    }
  }
  return best;
}

std::vector<Keypoint> assign_orientation(const Keypoint& kp, const scalespace::ScaleStack& stack) {
  return assign_orientation(kp, GradientCache(stack));
}

std::vector<Keypoint> assign_orientation(const Keypoint& kp, const GradientCache& grads) {
  const auto& field = grads.fields[static_cast<std::size_t>(grads.nearest_level(kp.scale))];
  const int h = field.magnitude.height(), w = field.magnitude.width();
  const double sigma = kOriWindowFactor * kp.scale;
  const int radius = static_cast<int>(std::lround(3.0 * sigma));
  if (!window_inside(kp.x, kp.y, radius, h, w)) return {};

  const int xi = static_cast<int>(std::lround(kp.x)), yi = static_cast<int>(std::lround(kp.y));
  std::array<double, kOriBins> raw{};
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      const double rx = xi + dx - kp.x, ry = yi + dy - kp.y;
      const double weight = std::exp(-(rx * rx + ry * ry) / (2.0 * sigma * sigma));
      const double mag = field.magnitude.at(yi + dy, xi + dx);
      const double ori = field.orientation.at(yi + dy, xi + dx);
      int bin = static_cast<int>(std::floor(ori * kOriBins / kTwoPi + 0.5));
      bin = ((bin % kOriBins) + kOriBins) % kOriBins;
      raw[static_cast<std::size_t>(bin)] += weight * mag;
    }
  // [1 4 6 4 1] / 16 circular smoothing
  std::array<double, kOriBins> hist{};
  for (int i = 0; i < kOriBins; ++i) {
    auto at = [&](int k) { return raw[static_cast<std::size_t>((i + k + kOriBins) % kOriBins)]; };
    hist[static_cast<std::size_t>(i)] =
        (at(-2) + at(2) + 4.0 * (at(-1) + at(1)) + 6.0 * at(0)) / 16.0;
  }
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::vector<Keypoint> out;
  if (!(peak > 0.0)) return out;
  for (int i = 0; i < kOriBins; ++i) {
    const double c = hist[static_cast<std::size_t>(i)];
    const double l = hist[static_cast<std::size_t>((i + kOriBins - 1) % kOriBins)];
    const double r = hist[static_cast<std::size_t>((i + 1) % kOriBins)];
    if (!(c > l && c > r && c >= kOriPeakRatio * peak)) continue;
    const double denom = l - 2.0 * c + r;
    const double off = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
    Keypoint o = kp;
    o.orientation = wrap_angle((i + off) * kTwoPi / kOriBins);
    out.push_back(o);
  }
  return out;
}

double descriptor_radius(double scale) { return kDescCellFactor * scale * kDescCells / 2.0; }

bool describe(const Keypoint& kp, const scalespace::ScaleStack& stack, Descriptor& out) {
  return describe(kp, GradientCache(stack), out);
}

bool describe(const Keypoint& kp, const GradientCache& grads, Descriptor& out) {
  const auto& field = grads.fields[static_cast<std::size_t>(grads.nearest_level(kp.scale))];
  const int h = field.magnitude.height(), w = field.magnitude.width();
  if (!window_inside(kp.x, kp.y, descriptor_radius(kp.scale), h, w)) return false;

  const double cell = kDescCellFactor * kp.scale;
  const double half = kDescCells / 2.0;
  const int reach = static_cast<int>(std::ceil(cell * std::numbers::sqrt2 * (kDescCells + 1) * 0.5));
  const double c = std::cos(kp.orientation), s = std::sin(kp.orientation);
  const int xi = static_cast<int>(std::lround(kp.x)), yi = static_cast<int>(std::lround(kp.y));

  std::array<double, kDescCells * kDescCells * kDescBins> hist{};
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx) {
      const double rx = xi + dx - kp.x, ry = yi + dy - kp.y;
      const double u = (c * rx + s * ry) / cell;
      const double v = (-s * rx + c * ry) / cell;
      const double rbin = v + half - 0.5, cbin = u + half - 0.5;
      if (rbin <= -1.0 || rbin >= kDescCells || cbin <= -1.0 || cbin >= kDescCells) continue;
      const int py = clamp_index(yi + dy, h), px = clamp_index(xi + dx, w);
      const double weight = std::exp(-(u * u + v * v) / (2.0 * half * half));
      const double mag = field.magnitude.at(py, px) * weight;
      const double obin = wrap_angle(field.orientation.at(py, px) - kp.orientation) * kDescBins / kTwoPi;

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      for (int ir = 0; ir < 2; ++ir) {
        const int rr = r0 + ir;
        if (rr < 0 || rr >= kDescCells) continue;
        const double wr = ir ? fr : 1.0 - fr;
        for (int ic = 0; ic < 2; ++ic) {
          const int cc = c0 + ic;
          if (cc < 0 || cc >= kDescCells) continue;
          const double wc = ic ? fc : 1.0 - fc;
          for (int io = 0; io < 2; ++io) {
            const int oo = (o0 + io) % kDescBins;
            const double wo = io ? fo : 1.0 - fo;
            hist[static_cast<std::size_t>((rr * kDescCells + cc) * kDescBins + oo)] += mag * wr * wc * wo;
          }
        }
      }
    }

  double norm = std::sqrt(std::inner_product(hist.begin(), hist.end(), hist.begin(), 0.0));
  if (!(norm > 1e-12)) return false;
  for (std::size_t i = 0; i < hist.size(); ++i)
    out[i] = std::min(static_cast<float>(hist[i] / norm), kDescClamp);
  double norm2 = 0.0;
  for (float f : out) norm2 += static_cast<double>(f) * f;
  norm2 = std::sqrt(norm2);
  for (float& f : out) f = static_cast<float>(f / norm2);
  return true;
}

Features extract_features(const Image& gray, const SiftParams& params) {
  return extract_features(gray, gray, params);
}

Features extract_features(const Image& detect_gray, const Image& describe_gray,
                          const SiftParams& params) {
  const Image det = luminance(detect_gray);
  const Image des = luminance(describe_gray);
  require(det.same_size(des), Errc::dimension_mismatch, "detection and description images differ in size");
  const auto det_stack = scalespace::build_scale_stack(det);
  const auto kps = detect(scalespace::build_dog(det_stack), params.contrast_threshold, params.edge_ratio);
  const GradientCache grads(&detect_gray == &describe_gray ? det_stack
                                                           : scalespace::build_scale_stack(des));
  Features f;
  for (const Keypoint& kp : kps)
    for (const Keypoint& oriented : assign_orientation(kp, grads)) {
      Descriptor d{};
      if (!describe(oriented, grads, d)) continue;
      f.keypoints.push_back(oriented);
      f.descriptors.push_back(d);
    }
  return f;
}

MatchSet match(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b, double ratio) {
  require(ratio > 0.0 && ratio < 1.0, Errc::invalid_argument, "ratio must lie in (0, 1)");
  MatchSet out;
  if (b.size() < 2) return out;
  // best claim per b index
  std::vector<int> owner(b.size(), -1);
  std::vector<double> owner_dist(b.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    int best = -1;
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double d = squared_distance(a[i], b[k]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        best = static_cast<int>(k);
      } else if (d < d2) {
        d2 = d;
      }
    }
    const double dist1 = std::sqrt(d1), dist2 = std::sqrt(d2);
    if (!(dist1 < ratio * dist2)) continue;
    const auto slot = static_cast<std::size_t>(best);
    if (owner[slot] < 0 || dist1 < owner_dist[slot]) {
      owner[slot] = static_cast<int>(i);
      owner_dist[slot] = dist1;
    }
  }
  for (std::size_t k = 0; k < b.size(); ++k)
    if (owner[k] >= 0) out.matches.push_back({owner[k], static_cast<int>(k), owner_dist[k]});
  std::sort(out.matches.begin(), out.matches.end(),
            [](const Match& x, const Match& y) { return x.index_a < y.index_a; });
  out.inlier_mask.assign(out.matches.size(), true);
  return out;
}

namespace {

using Cplx = std::complex<double>;

struct Similarity {
  Cplx z{1.0, 0.0};
  Cplx t{0.0, 0.0};
  Cplx apply(Cplx p) const { return z * p + t; }
};

std::vector<bool> inliers_for(const Similarity& m, const std::vector<Cplx>& pa,
                              const std::vector<Cplx>& pb, double tol) {
  std::vector<bool> mask(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) mask[i] = std::abs(m.apply(pa[i]) - pb[i]) <= tol;
  return mask;
}

Similarity fit_least_squares(const std::vector<Cplx>& pa, const std::vector<Cplx>& pb,
                             const std::vector<bool>& mask, Model model) {
  Cplx ma{0, 0}, mb{0, 0};
  double n = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (mask[i]) {
      ma += pa[i];
      mb += pb[i];
      n += 1.0;
    }
  ma /= n;
  mb /= n;
  Similarity m;
  if (model == Model::similarity) {
    Cplx num{0, 0};
    double den = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i)
      if (mask[i]) {
        num += std::conj(pa[i] - ma) * (pb[i] - mb);
        den += std::norm(pa[i] - ma);
      }
    if (den > 0.0) m.z = num / den;
  }
  m.t = mb - m.z * ma;
  return m;
}

}  // namespace

MatchSet verify_ransac(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                       const std::vector<Keypoint>& kps_b, Model model, double tol_px, int iters,
                       std::uint64_t seed) {
  MatchSet out = matches;
  const std::size_t n = matches.matches.size();
  out.inlier_mask.assign(n, false);
  const std::size_t minimal = model == Model::translation ? 1 : 2;
  if (n < minimal || iters <= 0) return out;

  std::vector<Cplx> pa(n), pb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Match& m = matches.matches[i];
    require(m.index_a >= 0 && static_cast<std::size_t>(m.index_a) < kps_a.size() && m.index_b >= 0 &&
                static_cast<std::size_t>(m.index_b) < kps_b.size(),
            Errc::invalid_argument, "match index out of range");
    pa[i] = {kps_a[static_cast<std::size_t>(m.index_a)].x, kps_a[static_cast<std::size_t>(m.index_a)].y};
    pb[i] = {kps_b[static_cast<std::size_t>(m.index_b)].x, kps_b[static_cast<std::size_t>(m.index_b)].y};
  }

  Rng rng(seed);
  std::vector<bool> best_mask(n, false);
  std::size_t best_count = 0;
  for (int it = 0; it < iters; ++it) {
    Similarity m;
    const auto i = static_cast<std::size_t>(rng.below(n));
    if (model == Model::translation) {
      m.t = pb[i] - pa[i];
    } else {
      auto k = static_cast<std::size_t>(rng.below(n - 1));
      if (k >= i) ++k;
      const Cplx da = pa[k] - pa[i];
      if (std::abs(da) < 1e-9) continue;
      m.z = (pb[k] - pb[i]) / da;
      m.t = pb[i] - m.z * pa[i];
    }
    auto mask = inliers_for(m, pa, pb, tol_px);
    const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
    }
  }
  if (best_count >= minimal) {
    auto refit = inliers_for(fit_least_squares(pa, pb, best_mask, model), pa, pb, tol_px);
    if (static_cast<std::size_t>(std::count(refit.begin(), refit.end(), true)) >= best_count)
      best_mask = std::move(refit);
  }
  out.inlier_mask = best_mask;
  return out;
}

double Recovery::gate_pass_rate() const {
  return ratio_matches > 0 ? static_cast<double>(count) / ratio_matches : 0.0;
}

Recovery recover_from_features(Features derained, Features clean, const SiftParams& params) {
  Recovery r;
  r.matches = match(derained.descriptors, clean.descriptors, params.ratio);
  r.ratio_matches = static_cast<int>(r.matches.matches.size());
  for (std::size_t i = 0; i < r.matches.matches.size(); ++i) {
    const Match& m = r.matches.matches[i];
    const Keypoint& a = derained.keypoints[static_cast<std::size_t>(m.index_a)];
    const Keypoint& b = clean.keypoints[static_cast<std::size_t>(m.index_b)];
    const double ratio = a.scale / b.scale;
    r.matches.inlier_mask[i] = std::hypot(a.x - b.x, a.y - b.y) <= params.gate_px &&
                               ratio <= params.gate_scale && ratio >= 1.0 / params.gate_scale;
  }
  r.count = static_cast<int>(r.matches.inlier_count());
  r.derained_keypoints = static_cast<int>(derained.size());
  r.clean_keypoints = static_cast<int>(clean.size());
  r.derained = std::move(derained);
  r.clean = std::move(clean);
  return r;
}

Recovery recovered_keypoints(const Image& derained, const Image& clean, const SiftParams& params) {
  require(derained.same_size(clean), Errc::dimension_mismatch, "derained and clean differ in size");
  return recover_from_features(extract_features(luminance(derained), params),
                               extract_features(luminance(clean), params), params);
}

Recovery recovered_keypoints(const Image& detect_img, const Image& describe_img, const Image& clean,
                             const SiftParams& params) {
  require(detect_img.same_size(clean) && describe_img.same_size(clean), Errc::dimension_mismatch,
          "derained and clean differ in size");
  return recover_from_features(extract_features(luminance(detect_img), luminance(describe_img), params),
                               extract_features(luminance(clean), params), params);
}

std::string features_to_json(const Features& f) {
  nlohmann::json doc;
  doc["keypoints"] = nlohmann::json::array();
  for (const Keypoint& kp : f.keypoints)
    doc["keypoints"].push_back({{"x", kp.x}, {"y", kp.y}, {"scale", kp.scale},
                                {"orientation", kp.orientation}, {"response", kp.response}});
  doc["descriptors"] = nlohmann::json::array();
  for (const Descriptor& d : f.descriptors) doc["descriptors"].push_back(d);
  return doc.dump(1);
}

Features features_from_json(const std::string& text) {
  Features f;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& k : doc.at("keypoints"))
      f.keypoints.push_back({k.at("x").get<double>(), k.at("y").get<double>(), k.at("scale").get<double>(),
                             k.at("response").get<double>(), k.at("orientation").get<double>()});
    for (const auto& d : doc.at("descriptors")) {
      require(d.size() == 128, Errc::corrupt_data, "descriptor must have 128 entries");
      Descriptor v{};
      for (std::size_t i = 0; i < 128; ++i) v[i] = d[i].get<float>();
      f.descriptors.push_back(v);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::corrupt_data, std::string("bad feature JSON: ") + e.what());
  }
  require(f.descriptors.empty() || f.descriptors.size() == f.keypoints.size(), Errc::corrupt_data,
          "keypoint and descriptor counts differ");
  return f;
}

std::string matches_to_json(const MatchSet& m) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t i = 0; i < m.matches.size(); ++i)
    doc.push_back({{"a", m.matches[i].index_a},
                   {"b", m.matches[i].index_b},
                   {"distance", m.matches[i].distance},
                   {"inlier", i < m.inlier_mask.size() && m.inlier_mask[i]}});
  return doc.dump(1);
}

}  // namespace idsr::sift
