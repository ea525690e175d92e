#include "ballnet/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ballnet/image_io.hpp"

namespace ballnet {

double Heatmap::max_value() const {
  double m = 0;
  for (double v : values) m = std::max(m, v);
  return m;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotation_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation index: " + path);
  std::vector<AnnotationRecord> records;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (fields.size() != 5)
      throw DataError("annotation row " + std::to_string(row) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    double x0;
    if (row == 1 && !fields[1].empty() && !parse_double(fields[1], x0)) continue;  // header

    AnnotationRecord rec;
    rec.image_path = fields[0];
    bool all_empty = fields[1].empty() && fields[2].empty() && fields[3].empty() &&
                     fields[4].empty();
    bool any_empty = fields[1].empty() || fields[2].empty() || fields[3].empty() ||
                     fields[4].empty();
    if (all_empty) {
      rec.box.present = false;
    } else if (any_empty) {
      throw DataError("annotation row " + std::to_string(row) +
                      ": partially empty coordinates");
    } else {
      double c[4];
      for (int i = 0; i < 4; ++i)
        if (!parse_double(fields[i + 1], c[i]))
          throw DataError("annotation row " + std::to_string(row) + ": bad coordinate '" +
                          fields[i + 1] + "'");
      // source-image pixels -> heatmap space
      rec.box.present = true;
      rec.box.x_min = c[0] / kDownsampleFactor;
      rec.box.y_min = c[1] / kDownsampleFactor;
      rec.box.x_max = c[2] / kDownsampleFactor;
      rec.box.y_max = c[3] / kDownsampleFactor;
      if (!(rec.box.x_min < rec.box.x_max) || !(rec.box.y_min < rec.box.y_max))
        throw DataError("annotation row " + std::to_string(row) + ": inverted box");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::pair<std::vector<AnnotationRecord>, std::vector<AnnotationRecord>> split_records(
    std::vector<AnnotationRecord> records, double split_ratio, uint32_t seed) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw DataError("split_ratio must be in (0,1)");
  std::mt19937 rng(seed);
  std::shuffle(records.begin(), records.end(), rng);
  size_t n_train = size_t(std::floor(split_ratio * double(records.size())));
  std::vector<AnnotationRecord> train(records.begin(), records.begin() + n_train);
  std::vector<AnnotationRecord> test(records.begin() + n_train, records.end());
  return {std::move(train), std::move(test)};
}

std::pair<std::vector<AnnotatedFrame>, std::vector<AnnotatedFrame>> load_annotations(
    const std::string& path, double split_ratio, uint32_t seed) {
  auto [train_recs, test_recs] = split_records(parse_annotation_index(path), split_ratio, seed);
  auto load_all = [](const std::vector<AnnotationRecord>& recs) {
    std::vector<AnnotatedFrame> out;
    out.reserve(recs.size());
    int t = 0;
    for (const auto& r : recs) {
      ImageFrame f = load_image(r.image_path);
      f.timestamp_index = t++;
      out.emplace_back(std::move(f), r.box);
    }
    return out;
  };
  return {load_all(train_recs), load_all(test_recs)};
}

Heatmap teaching_signal(const BoundingBoxAnnotation& box, int width, int height) {
  Heatmap g(width, height);
  if (!box.present) return g;
  const double r = box.radius();
  if (r <= 0.0) throw DataError("degenerate box");
  const double cx = box.center_x(), cy = box.center_y();
  const double inv = 1.0 / (2.0 * r * r);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      g.at(x, y) = std::exp(-d2 * inv);
    }
  return g;
}

}  // namespace ballnet
