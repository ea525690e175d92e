#include "ballnet/plotting.hpp"

#include <algorithm>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ballnet {

namespace {

cv::Mat heatmap_to_color(const Heatmap& m, double vmax) {
  cv::Mat gray(m.height, m.width, CV_8UC1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      gray.at<uchar>(y, x) = uchar(std::clamp(m.at(x, y) / vmax, 0.0, 1.0) * 255.0);
  cv::Mat color;
  cv::applyColorMap(gray, color, cv::COLORMAP_JET);
  return color;
}

}  // namespace

void save_heatmap_panel(const Heatmap& m, const std::string& path, double vmax) {
  cv::Mat color = heatmap_to_color(m, vmax);
  const int bar_w = 24, gap = 8;
  cv::Mat panel(color.rows, color.cols + gap + bar_w, CV_8UC3, cv::Scalar(255, 255, 255));
  color.copyTo(panel(cv::Rect(0, 0, color.cols, color.rows)));
  cv::Mat bar_gray(color.rows, bar_w, CV_8UC1);
  for (int y = 0; y < color.rows; ++y)
    bar_gray.row(y).setTo(255 - y * 255 / std::max(1, color.rows - 1));
  cv::Mat bar;
  cv::applyColorMap(bar_gray, bar, cv::COLORMAP_JET);
  bar.copyTo(panel(cv::Rect(color.cols + gap, 0, bar_w, color.rows)));
  if (!cv::imwrite(path, panel)) throw DataError("cannot write plot: " + path);
}

void save_trajectory_overlay(const SyntheticSequence& seq, const std::string& path, int scale) {
  if (seq.heatmaps.empty()) throw DataError("trajectory overlay: empty sequence");
  const int w = seq.heatmaps[0].width * scale, h = seq.heatmaps[0].height * scale;
  cv::Mat canvas(h, w, CV_8UC3, cv::Scalar(30, 30, 30));
  auto draw_path = [&](const std::vector<std::pair<double, double>>& ps, cv::Scalar color) {
    for (size_t i = 1; i < ps.size(); ++i)
      cv::line(canvas,
               cv::Point(int(ps[i - 1].first * scale), int(ps[i - 1].second * scale)),
               cv::Point(int(ps[i].first * scale), int(ps[i].second * scale)), color, 2);
    if (!ps.empty())
      cv::circle(canvas, cv::Point(int(ps.back().first * scale), int(ps.back().second * scale)),
                 4, cv::Scalar(255, 255, 255), cv::FILLED);
  };
  draw_path(seq.positions, cv::Scalar(0, 200, 255));
  if (!seq.positions2.empty()) draw_path(seq.positions2, cv::Scalar(255, 120, 0));
  if (!cv::imwrite(path, canvas)) throw DataError("cannot write plot: " + path);
}

}  // namespace ballnet
