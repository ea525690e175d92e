#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ballnet/errors.hpp"

namespace ballnet {

inline constexpr int kHeatmapWidth = 160;
inline constexpr int kHeatmapHeight = 120;
/// The detector downsamples by exactly this factor.
inline constexpr int kDownsampleFactor = 4;

/// Single-channel non-negative confidence grid at detector output resolution.
struct Heatmap {
  int width = kHeatmapWidth;
  int height = kHeatmapHeight;
  std::vector<double> values;  // row-major, height*width

  Heatmap() : values(size_t(kHeatmapWidth) * kHeatmapHeight, 0.0) {}
  Heatmap(int w, int h) : width(w), height(h), values(size_t(w) * h, 0.0) {}

  double& at(int x, int y) { return values[size_t(y) * width + x]; }
  double at(int x, int y) const { return values[size_t(y) * width + x]; }
  double max_value() const;
};

/// RGB frame with intensities in [0,1], channels-last.
struct ImageFrame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // height*width*3
  std::string source_id;
  int timestamp_index = 0;
};

/// Ground truth in output-heatmap coordinates. present=false means "no ball";
/// the coordinate fields are then meaningless and ignored.
struct BoundingBoxAnnotation {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  bool present = false;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  /// Teaching-signal radius: half the smaller box side.
  double radius() const { return 0.5 * std::min(x_max - x_min, y_max - y_min); }
};

/// Sub-pixel detection; (-1,-1) is the "no ball" sentinel.
struct BallCenter {
  double x = -1, y = -1;
  bool detected() const { return !(x == -1 && y == -1); }
  static BallCenter none() { return {}; }
};

/// h history heatmaps (t-h .. t-1) plus p target heatmaps (t .. t+p-1).
struct SequenceSample {
  std::vector<Heatmap> history;
  std::vector<Heatmap> targets;
};

/// One line of the annotation index, already rescaled to heatmap coordinates.
struct AnnotationRecord {
  std::string image_path;
  BoundingBoxAnnotation box;
};

using AnnotatedFrame = std::pair<ImageFrame, BoundingBoxAnnotation>;

/// Parses the comma-separated annotation index. Coordinates on disk are in
/// source-image pixels and are divided by the fixed x4 factor here. An
/// optional header line is detected by a non-numeric second field.
std::vector<AnnotationRecord> parse_annotation_index(const std::string& path);

/// Deterministic shuffle + floor(ratio*n) split.
std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>> split_records(
    std::vector<AnnotationRecord> records, double split_ratio, uint32_t seed);

/// Full ingestion: parse, split, decode every referenced image.
std::pair<std::vector<AnnotatedFrame>, std::vector<AnnotatedFrame>> load_annotations(
    const std::string& path, double split_ratio, uint32_t seed);

/// Renders the target heatmap for a box: a peak-normalized Gaussian centered
/// at the box center with radius half the smaller side. Absent box -> zeros.
Heatmap teaching_signal(const BoundingBoxAnnotation& box, int width = kHeatmapWidth,
                        int height = kHeatmapHeight);

}  // namespace ballnet
