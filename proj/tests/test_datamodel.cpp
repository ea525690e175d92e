#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ballnet/datamodel.hpp"
#include "ballnet/image_io.hpp"

using namespace ballnet;
namespace fs = std::filesystem;

namespace {

std::string write_index(const std::string& name, const std::string& body) {
  std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("parses records and rescales to heatmap space") {
  auto path = write_index("dm_basic.csv",
                          "image_path,x_min,y_min,x_max,y_max\n"
                          "a.png,100,40,140,80\n"
                          "b.png,,,,\n");
  auto recs = parse_annotation_index(path);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].image_path == "a.png");
  CHECK(recs[0].box.present);
  CHECK(recs[0].box.x_min == doctest::Approx(25.0));
  CHECK(recs[0].box.y_min == doctest::Approx(10.0));
  CHECK(recs[0].box.x_max == doctest::Approx(35.0));
  CHECK(recs[0].box.y_max == doctest::Approx(20.0));
  CHECK(recs[0].box.center_x() == doctest::Approx(30.0));
  CHECK(recs[0].box.radius() == doctest::Approx(5.0));
  CHECK_FALSE(recs[1].box.present);
}

TEST_CASE("header is optional") {
  auto no_header = write_index("dm_nh.csv", "a.png,100,40,140,80\n");
  CHECK(parse_annotation_index(no_header).size() == 1);
}

TEST_CASE("malformed rows name the row number") {
  auto bad = write_index("dm_bad.csv", "a.png,1,2,3,4\nb.png,1,2,3\n");
  CHECK_THROWS_WITH_AS(parse_annotation_index(bad),
                       doctest::Contains("row 2"), DataError);
  auto inverted = write_index("dm_inv.csv", "a.png,50,40,10,80\n");
  CHECK_THROWS_AS(parse_annotation_index(inverted), DataError);
  auto partial = write_index("dm_part.csv", "a.png,50,,60,80\n");
  CHECK_THROWS_AS(parse_annotation_index(partial), DataError);
  auto garbage = write_index("dm_garbage.csv", "a.png,1,2,3,4\nb.png,1,x,3,4\n");
  CHECK_THROWS_WITH_AS(parse_annotation_index(garbage),
                       doctest::Contains("row 2"), DataError);
  CHECK_THROWS_AS(parse_annotation_index("/nonexistent/idx.csv"), DataError);
}

TEST_CASE("split is deterministic and loses nothing") {
  std::vector<AnnotationRecord> recs;
  for (int i = 0; i < 10; ++i) {
    AnnotationRecord r;
    r.image_path = "img" + std::to_string(i);
    recs.push_back(r);
  }
  auto [tr1, te1] = split_records(recs, 0.7, 42);
  auto [tr2, te2] = split_records(recs, 0.7, 42);
  CHECK(tr1.size() == 7);
  CHECK(te1.size() == 3);
  REQUIRE(tr1.size() == tr2.size());
  for (size_t i = 0; i < tr1.size(); ++i) CHECK(tr1[i].image_path == tr2[i].image_path);

  std::set<std::string> seen;
  for (const auto& r : tr1) seen.insert(r.image_path);
  for (const auto& r : te1) seen.insert(r.image_path);
  CHECK(seen.size() == 10);

  auto [tr3, te3] = split_records(recs, 0.7, 43);
  bool same = true;
  for (size_t i = 0; i < tr1.size(); ++i) same = same && tr1[i].image_path == tr3[i].image_path;
  CHECK_FALSE(same);

  // floor rule on an odd count
  recs.resize(9);
  auto [tr4, te4] = split_records(recs, 0.7, 1);
  CHECK(tr4.size() == 6);  // floor(0.7 * 9)
  CHECK(te4.size() == 3);

  CHECK_THROWS_AS(split_records(recs, 0.0, 1), DataError);
  CHECK_THROWS_AS(split_records(recs, 1.0, 1), DataError);
}

TEST_CASE("teaching signal matches a direct Gaussian evaluation") {
  BoundingBoxAnnotation box;
  box.present = true;
  box.x_min = 20.5;
  box.x_max = 28.5;  // width 8
  box.y_min = 10.0;
  box.y_max = 16.0;  // height 6 -> r = 3
  Heatmap g = teaching_signal(box, 64, 48);
  const double cx = 24.5, cy = 13.0, r = 3.0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      CHECK(g.at(x, y) == doctest::Approx(std::exp(-d2 / (2.0 * r * r))).epsilon(1e-12));
    }
  CHECK(g.max_value() <= 1.0);
  CHECK(g.max_value() > 0.9);  // peak-normalized, near-center pixel exists
}

TEST_CASE("teaching signal for an absent box is all zero") {
  BoundingBoxAnnotation none;
  Heatmap g = teaching_signal(none, 32, 24);
  CHECK(g.max_value() == 0.0);
}

TEST_CASE("degenerate box is rejected") {
  BoundingBoxAnnotation flat;
  flat.present = true;
  flat.x_min = 5;
  flat.x_max = 5;
  flat.y_min = 1;
  flat.y_max = 9;
  CHECK_THROWS_AS(teaching_signal(flat, 32, 24), DataError);
}

TEST_CASE("image io round trip") {
  ImageFrame f;
  f.width = 16;
  f.height = 8;
  f.pixels.assign(size_t(16 * 8 * 3), 0.0f);
  for (size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = float((i % 64) / 63.0);
  std::string path = (fs::temp_directory_path() / "dm_io.png").string();
  save_image(f, path);
  ImageFrame g = load_image(path);
  REQUIRE(g.width == 16);
  REQUIRE(g.height == 8);
  for (size_t i = 0; i < f.pixels.size(); ++i)
    CHECK(std::abs(f.pixels[i] - g.pixels[i]) < 1.0 / 128.0);
  ImageFrame h = load_image(path, 8, 4);
  CHECK(h.width == 8);
  CHECK(h.height == 4);
  CHECK_THROWS_WITH_AS(load_image("/nonexistent/img.png"),
                       doctest::Contains("/nonexistent/img.png"), DataError);
}
