#pragma once

#include "idsr/image.hpp"
#include "idsr/sift.hpp"

namespace idsr {

/// Side-by-side RGB canvas (a left, b right) with keypoint markers and one
/// line per match: green for inliers, red for rejected matches.
Image render_matches(const Image& a, const Image& b, const std::vector<sift::Keypoint>& kps_a,
                     const std::vector<sift::Keypoint>& kps_b, const sift::MatchSet& matches,
                     bool show_outliers = true);

}  // namespace idsr
