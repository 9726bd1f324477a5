#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "idsr/image.hpp"
#include "idsr/scalespace.hpp"

namespace idsr::sift {

struct Keypoint {
  double x = 0.0;  ///< column, subpixel
  double y = 0.0;  ///< row, subpixel
  double scale = 0.0;
  double response = 0.0;
  double orientation = 0.0;  ///< radians in [0, 2 pi)
};

using Descriptor = std::array<float, 128>;

struct Match {
  int index_a = 0;
  int index_b = 0;
  double distance = 0.0;
};

struct MatchSet {
  std::vector<Match> matches;
  std::vector<bool> inlier_mask;

  std::size_t inlier_count() const;
};

struct SiftParams {
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  double ratio = 0.75;
  double gate_px = 2.0;
  double gate_scale = 1.5;
};

/// Characteristic scale of DoG level j: the geometric mean of its two
/// Gaussian scales, sigma_j * 2^(1/4) for the default stack.
double dog_level_scale(const scalespace::DoGStack& dog, double level);

/// 3x3x3 DoG extrema with one quadratic refinement step, contrast and edge
/// rejection. The two boundary levels are searched too, compared against
/// their single neighbouring level and refined spatially only. Output is
/// sorted by (y, x, scale).
std::vector<Keypoint> detect(const scalespace::DoGStack& dog, double contrast_threshold = 0.03,
                             double edge_ratio = 10.0);

/// One keypoint per histogram peak at >= 80% of the maximum. Returns an
/// empty list when the window leaves the image.
std::vector<Keypoint> assign_orientation(const Keypoint& kp, const scalespace::ScaleStack& stack);

/// Gradients are computed once per level and reused across keypoints.
struct GradientCache {
  explicit GradientCache(const scalespace::ScaleStack& stack);
  std::array<double, 5> scales{};
  std::array<scalespace::GradientField, 5> fields;

  int nearest_level(double s) const;
};

std::vector<Keypoint> assign_orientation(const Keypoint& kp, const GradientCache& grads);

/// Descriptor window half-width in pixels for a keypoint of this scale.
double descriptor_radius(double scale);

/// 4x4x8 histogram of rotated, Gaussian-weighted Sobel gradients with
/// trilinear binning; normalize, clamp at 0.2, renormalize. Returns false
/// when the window leaves the image or the patch has no gradient.
bool describe(const Keypoint& kp, const scalespace::ScaleStack& stack, Descriptor& out);
bool describe(const Keypoint& kp, const GradientCache& grads, Descriptor& out);

struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  std::size_t size() const noexcept { return keypoints.size(); }
};

/// Full pipeline on one grayscale image.
Features extract_features(const Image& gray, const SiftParams& params = {});
/// Detection on `detect_gray`, orientation and description on `describe_gray`.
Features extract_features(const Image& detect_gray, const Image& describe_gray,
                          const SiftParams& params = {});

/// Ratio-test nearest-neighbour matching, one-to-one: when two a-descriptors
/// claim the same b, the smaller distance wins (lower index_a on ties).
/// Sorted by index_a.
MatchSet match(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b,
               double ratio = 0.75);

enum class Model { translation, similarity };

MatchSet verify_ransac(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                       const std::vector<Keypoint>& kps_b, Model model, double tol_px,
                       int iters, std::uint64_t seed);

struct Recovery {
  int count = 0;
  int clean_keypoints = 0;
  int derained_keypoints = 0;
  int ratio_matches = 0;
  MatchSet matches;  ///< ratio-test matches; inlier_mask = passed the gate
  Features derained;
  Features clean;

  /// Fraction of ratio-test matches surviving the geometric gate.
  double gate_pass_rate() const;
};

/// SIFT on both images, ratio-test matching derained -> clean, then the
/// identity-geometry gate (position within gate_px, scale ratio within
/// gate_scale). Inputs may be RGB or gray.
Recovery recovered_keypoints(const Image& derained, const Image& clean, const SiftParams& params = {});
/// Hybrid mode: keypoints from `detect_img`, descriptors from `describe_img`.
Recovery recovered_keypoints(const Image& detect_img, const Image& describe_img, const Image& clean,
                             const SiftParams& params = {});
Recovery recover_from_features(Features derained, Features clean, const SiftParams& params);

std::string features_to_json(const Features& f);
Features features_from_json(const std::string& text);
std::string matches_to_json(const MatchSet& m);

}  // namespace idsr::sift
