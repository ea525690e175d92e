#include "ballnet/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ballnet {

ImageFrame load_image(const std::string& path, std::optional<int> width,
                      std::optional<int> height) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw DataError("cannot read image: " + path);
  if (width && height && (img.cols != *width || img.rows != *height))
    cv::resize(img, img, cv::Size(*width, *height), 0, 0, cv::INTER_AREA);
  ImageFrame f;
  f.width = img.cols;
  f.height = img.rows;
  f.source_id = path;
  f.pixels.resize(size_t(f.width) * f.height * 3);
  for (int y = 0; y < f.height; ++y) {
    const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < f.width; ++x) {
      size_t i = (size_t(y) * f.width + x) * 3;
      f.pixels[i + 0] = row[x][2] / 255.0f;  // BGR -> RGB
      f.pixels[i + 1] = row[x][1] / 255.0f;
      f.pixels[i + 2] = row[x][0] / 255.0f;
    }
  }
  return f;
}

void save_image(const ImageFrame& frame, const std::string& path) {
  cv::Mat img(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < frame.width; ++x) {
      size_t i = (size_t(y) * frame.width + x) * 3;
      auto clamp8 = [](float v) {
        return uchar(std::clamp(int(v * 255.0f + 0.5f), 0, 255));
      };
      row[x][2] = clamp8(frame.pixels[i + 0]);
      row[x][1] = clamp8(frame.pixels[i + 1]);
      row[x][0] = clamp8(frame.pixels[i + 2]);
    }
  }
  if (!cv::imwrite(path, img)) throw DataError("cannot write image: " + path);
}

}  // namespace ballnet
