#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "idsr/rain.hpp"
#include "idsr/sift.hpp"
#include "test_util.hpp"

namespace idsr::sift {
namespace {

using test::blob_image;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, kTwoPi);
  if (d < 0) d += kTwoPi;
  return std::min(d, kTwoPi - d);
}

// R(y', x') = I(x', N-1-y'): a point (y, x) moves to (N-1-x, y) and
// gradient angles drop by pi/2.
Image rotate_quarter(const Image& img) {
  const int n = img.height();
  Image out(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.at(y, x) = img.at(x, n - 1 - y);
  return out;
}

double distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

TEST(Detect, SingleBlob) {
  for (double sigma : {1.9, 2.7, 3.8}) {
    const auto dog = scalespace::build_dog(scalespace::build_scale_stack(blob_image(64, 64, {{32, 32, sigma, 0.6}})));
    const auto kps = detect(dog);
    ASSERT_EQ(kps.size(), 1u) << sigma;
    EXPECT_NEAR(kps[0].x, 32.0, 0.5);
    EXPECT_NEAR(kps[0].y, 32.0, 0.5);
    EXPECT_LT(std::abs(std::log2(kps[0].scale / sigma)), 0.5);
  }
}

TEST(Detect, ConstantImageIsEmpty) {
  const auto dog = scalespace::build_dog(scalespace::build_scale_stack(Image(48, 48, 1, 0.4f)));
  EXPECT_TRUE(detect(dog).empty());
}

TEST(Detect, ScaleMappingOfLevels) {
  const auto dog = scalespace::build_dog(scalespace::build_scale_stack(Image(16, 16, 1, 0.0f)));
  for (int j = 0; j < 4; ++j)
    EXPECT_NEAR(dog_level_scale(dog, j), std::sqrt(scalespace::kStackScales[j] * scalespace::kStackScales[j + 1]),
                1e-12);
  EXPECT_NEAR(dog_level_scale(dog, 0.5), std::sqrt(dog_level_scale(dog, 0) * dog_level_scale(dog, 1)), 1e-12);
}

TEST(Features, QuarterTurnCovariance) {
  const Image img = luminance(synth_scene(96, 96, 17));
  const Image rot = rotate_quarter(img);
  const auto fa = extract_features(img);
  const auto fb = extract_features(rot);
  ASSERT_GT(fa.size(), 5u);
  int found = 0, close = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const auto& k = fa.keypoints[i];
    const double ey = 95.0 - k.x, ex = k.y;
    for (std::size_t j = 0; j < fb.size(); ++j) {
      const auto& r = fb.keypoints[j];
      if (std::hypot(r.x - ex, r.y - ey) < 1e-3 && angle_diff(r.orientation, k.orientation - std::numbers::pi / 2) < 1e-3) {
        ++found;
        if (distance(fa.descriptors[i], fb.descriptors[j]) < 0.05) ++close;
        break;
      }
    }
  }
  EXPECT_GE(found, static_cast<int>(0.9 * fa.size()));
  EXPECT_GE(close, static_cast<int>(0.9 * found));
}

TEST(Features, DescriptorIsNormalizedAndAffineIntensityInvariant) {
  const Image img = luminance(synth_scene(64, 64, 4));
  Image affine = img;
  for (float& v : affine.data()) v = 0.5f * v + 0.1f;
  const auto stack = scalespace::build_scale_stack(img);
  const auto stack2 = scalespace::build_scale_stack(affine);
  const auto kps = detect(scalespace::build_dog(stack));
  int described = 0;
  for (const auto& kp : kps)
    for (const auto& oriented : assign_orientation(kp, stack)) {
      Descriptor a{}, b{};
      if (!describe(oriented, stack, a)) continue;
      ASSERT_TRUE(describe(oriented, stack2, b));
      ++described;
      double norm = 0.0;
      for (float v : a) {
        EXPECT_GE(v, 0.0f);
        norm += v * v;
      }
      EXPECT_NEAR(norm, 1.0, 1e-5);
      EXPECT_LT(distance(a, b), 1e-4);
    }
  EXPECT_GT(described, 0);
}

TEST(Features, HybridUsesSecondImageForGradientsOnly) {
  const Image a = luminance(synth_scene(64, 64, 5));
  const auto same = extract_features(a, a);
  const auto single = extract_features(a);
  ASSERT_EQ(same.size(), single.size());
  for (std::size_t i = 0; i < same.size(); ++i) EXPECT_EQ(same.descriptors[i], single.descriptors[i]);
}

std::vector<Descriptor> random_descriptors(int n, std::mt19937_64& eng) {
  std::normal_distribution<float> d;
  std::vector<Descriptor> out(static_cast<std::size_t>(n));
  for (auto& v : out) {
    double s = 0.0;
    for (float& x : v) {
      x = std::abs(d(eng));
      s += x * x;
    }
    for (float& x : v) x = static_cast<float>(x / std::sqrt(s));
  }
  return out;
}

TEST(Match, AgreesWithBruteForceOracle) {
  std::mt19937_64 eng(3);
  auto b = random_descriptors(60, eng);
  std::vector<Descriptor> a;
  std::normal_distribution<float> noise(0.0f, 0.02f);
  for (int i = 0; i < 40; ++i) {
    Descriptor v = b[static_cast<std::size_t>(i % 25)];  // repeats force one-to-one collisions
    for (float& x : v) x += noise(eng);
    a.push_back(v);
  }
  for (const auto& extra : random_descriptors(10, eng)) a.push_back(extra);

  const double ratio = 0.8;
  const auto m = match(a, b, ratio);
  // oracle: ratio-test candidates, then the closest claimant per b wins
  std::map<int, std::pair<double, int>> best_for_b;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) {
    double d1 = 1e9, d2 = 1e9;
    int j1 = -1;
    for (int j = 0; j < static_cast<int>(b.size()); ++j) {
      const double d = distance(a[i], b[j]);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        j1 = j;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (!(d1 < ratio * d2)) continue;
    auto it = best_for_b.find(j1);
    if (it == best_for_b.end() || d1 < it->second.first) best_for_b[j1] = {d1, i};
  }
  std::set<std::pair<int, int>> expected;
  for (const auto& [j, v] : best_for_b) expected.insert({v.second, j});
  std::set<std::pair<int, int>> got;
  std::set<int> used_b;
  int last_a = -1;
  for (const auto& x : m.matches) {
    got.insert({x.index_a, x.index_b});
    EXPECT_TRUE(used_b.insert(x.index_b).second);
    EXPECT_GT(x.index_a, last_a);
    last_a = x.index_a;
    EXPECT_NEAR(x.distance, distance(a[x.index_a], b[x.index_b]), 1e-5);
  }
  EXPECT_EQ(got, expected);
  EXPECT_EQ(m.inlier_mask.size(), m.matches.size());
  EXPECT_TRUE(match({}, b).matches.empty());
}

struct Synthetic {
  std::vector<Keypoint> a, b;
  MatchSet matches;
  std::vector<bool> truth;
};

Synthetic synthetic_pairs(double scale, double angle, double tx, double ty) {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> pos(0.0, 200.0);
  Synthetic s;
  for (int i = 0; i < 40; ++i) {
    Keypoint ka{pos(eng), pos(eng), 2.0, 0.1, 0.0};
    Keypoint kb = ka;
    const bool inlier = i % 10 < 7;
    if (inlier) {
      kb.x = scale * (std::cos(angle) * ka.x - std::sin(angle) * ka.y) + tx;
      kb.y = scale * (std::sin(angle) * ka.x + std::cos(angle) * ka.y) + ty;
    } else {
      kb.x = pos(eng);
      kb.y = pos(eng);
    }
    s.a.push_back(ka);
    s.b.push_back(kb);
    s.matches.matches.push_back({i, i, 0.1});
    s.matches.inlier_mask.push_back(true);
    s.truth.push_back(inlier);
  }
  return s;
}

TEST(Ransac, TranslationRecoversInliers) {
  const auto s = synthetic_pairs(1.0, 0.0, 5.0, -3.0);
  const auto v = verify_ransac(s.matches, s.a, s.b, Model::translation, 1.0, 200, 11);
  EXPECT_EQ(v.inlier_mask, s.truth);
  EXPECT_EQ(v.inlier_count(), 28u);
  const auto again = verify_ransac(s.matches, s.a, s.b, Model::translation, 1.0, 200, 11);
  EXPECT_EQ(again.inlier_mask, v.inlier_mask);
}

TEST(Ransac, SimilarityRecoversInliers) {
  const auto s = synthetic_pairs(1.3, 0.4, -12.0, 8.0);
  const auto v = verify_ransac(s.matches, s.a, s.b, Model::similarity, 1.0, 500, 2);
  EXPECT_EQ(v.inlier_mask, s.truth);
  const auto t = verify_ransac(s.matches, s.a, s.b, Model::translation, 1.0, 500, 2);
  EXPECT_LT(t.inlier_count(), v.inlier_count());
}

TEST(Recovery, IdenticalImagesRecoverEverything) {
  const Image img = synth_scene(96, 96, 8);
  const auto r = recovered_keypoints(img, img);
  EXPECT_GT(r.clean_keypoints, 0);
  EXPECT_EQ(r.count, r.clean_keypoints);
  EXPECT_EQ(r.derained_keypoints, r.clean_keypoints);
  EXPECT_DOUBLE_EQ(r.gate_pass_rate(), 1.0);
}

TEST(Recovery, CountIsBoundedByBothSides) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Image clean = synth_scene(96, 96, seed);
    RainConfig rc;
    rc.seed = seed;
    const auto r = recovered_keypoints(synth_rain(clean, rc).rainy, clean);
    EXPECT_LE(r.count, std::min(r.clean_keypoints, r.derained_keypoints));
    EXPECT_LE(r.count, r.ratio_matches);
    for (std::size_t i = 0; i < r.matches.matches.size(); ++i) {
      if (!r.matches.inlier_mask[i]) continue;
      const auto& a = r.derained.keypoints[r.matches.matches[i].index_a];
      const auto& b = r.clean.keypoints[r.matches.matches[i].index_b];
      EXPECT_LE(std::hypot(a.x - b.x, a.y - b.y), 2.0);
    }
  }
}

TEST(Features, JsonRoundTrip) {
  const auto f = extract_features(luminance(synth_scene(64, 64, 6)));
  const auto back = features_from_json(features_to_json(f));
  ASSERT_EQ(back.size(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_DOUBLE_EQ(back.keypoints[i].x, f.keypoints[i].x);
    EXPECT_DOUBLE_EQ(back.keypoints[i].orientation, f.keypoints[i].orientation);
    EXPECT_EQ(back.descriptors[i], f.descriptors[i]);
  }
  EXPECT_EQ(test::error_code_of([] { (void)features_from_json("[1,2"); }), Errc::corrupt_data);
}

}  // namespace
}  // namespace idsr::sift
