#pragma once

#include <vector>

#include "ballnet/datamodel.hpp"

namespace ballnet {

/// 8-connected component of above-threshold pixels.
struct Contour {
  std::vector<std::pair<int, int>> pixels;  // (x, y)
  int area() const { return int(pixels.size()); }
};

inline constexpr double kDetectionThreshold = 0.1;

/// Connected components of {(x,y) : M(x,y) > threshold}, 8-connectivity.
std::vector<Contour> find_contours(const Heatmap& m, double threshold = kDetectionThreshold);

/// Threshold at 0.1, take the largest contour, reject if its area is <= a_min,
/// otherwise return the confidence-weighted centroid of the masked heatmap.
/// Ties on area go to the contour with more confidence mass, then to the one
/// whose topmost-leftmost pixel sorts first.
BallCenter extract_center(const Heatmap& m, double a_min);

/// Centroids of the k largest admissible contours (largest first).
/// Test utility for the two-ball scenario; the product path returns one center.
std::vector<BallCenter> extract_centers_topk(const Heatmap& m, double a_min, int k);

/// Area of the smallest ball in the training set: min over present boxes of
/// the pixel count of its thresholded teaching signal.
double estimate_a_min(const std::vector<BoundingBoxAnnotation>& train, int width = kHeatmapWidth,
                      int height = kHeatmapHeight);

}  // namespace ballnet
