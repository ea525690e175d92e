#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "ballnet/checkpoint.hpp"
#include "ballnet/config.hpp"
#include "ballnet/trainer.hpp"

using namespace ballnet;
namespace fs = std::filesystem;

namespace {

// A dark frame with one bright disc; the annotation is the disc's bounding
// box rescaled to heatmap coordinates.
AnnotatedFrame disc_frame(int width, int height, double cx, double cy, double r,
                          uint32_t noise_seed) {
  ImageFrame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(size_t(width) * height * 3, 0.0f);
  std::mt19937 rng(noise_seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.15f);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      size_t base = (size_t(y) * width + x) * 3;
      float v = noise(rng);
      bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
      f.pixels[base + 0] = inside ? 1.0f : v;
      f.pixels[base + 1] = inside ? 1.0f : v;
      f.pixels[base + 2] = inside ? 0.2f : v;
    }
  BoundingBoxAnnotation box;
  box.present = true;
  box.x_min = (cx - r) / kDownsampleFactor;
  box.x_max = (cx + r) / kDownsampleFactor;
  box.y_min = (cy - r) / kDownsampleFactor;
  box.y_max = (cy + r) / kDownsampleFactor;
  return {std::move(f), box};
}

AnnotatedFrame empty_frame(int width, int height, uint32_t noise_seed) {
  ImageFrame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(size_t(width) * height * 3, 0.05f);
  std::mt19937 rng(noise_seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.15f);
  for (auto& p : f.pixels) p = noise(rng);
  return {std::move(f), BoundingBoxAnnotation{}};
}

ModelSpec tiny_detector_spec() {
  ModelSpec spec;
  spec.input_width = 64;
  spec.input_height = 48;
  return spec;
}

}  // namespace

TEST_CASE("zero learning rate leaves every parameter bit-identical") {
  ModelSpec spec = tiny_detector_spec();
  SweatyNet<float> model(spec, 3);
  std::vector<AnnotatedFrame> data;
  for (int i = 0; i < 4; ++i)
    data.push_back(disc_frame(64, 48, 16.0 + 8 * i, 24.0, 6.0, uint32_t(i)));

  // learnable parameters only: batchnorm running statistics are buffers and
  // keep tracking activations regardless of the learning rate
  auto named = model.named_tensors();
  std::vector<std::pair<std::string, Tensor<float>*>> params;
  for (auto& [name, t] : named)
    if (name.find("running") == std::string::npos) params.emplace_back(name, t);

  auto before = snapshot_tensors(params);
  TrainConfig cfg = TrainConfig::image_stage();
  cfg.lr_detector = 0.0;
  cfg.max_epochs = 1;
  train_image_stage(cfg, model, data, {});
  auto after = snapshot_tensors(params);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
}

TEST_CASE("image-stage loss trends down across seeds") {
  int wins = 0;
  for (uint32_t seed : {1u, 2u, 3u}) {
    ModelSpec spec = tiny_detector_spec();
    SweatyNet<float> model(spec, seed);
    std::vector<AnnotatedFrame> data;
    for (int i = 0; i < 4; ++i)
      data.push_back(disc_frame(64, 48, 16.0 + 8 * i, 24.0, 6.0, seed * 10 + uint32_t(i)));
    TrainConfig cfg = TrainConfig::image_stage();
    cfg.max_epochs = 6;
    cfg.seed = seed;
    TrainReport r = train_image_stage(cfg, model, data, {});
    REQUIRE(r.epoch_losses.size() == 6);
    if (r.epoch_losses.back() < r.epoch_losses.front()) ++wins;
    CHECK_FALSE(r.aborted_on_nan);
    CHECK(r.adam_beta1 == 0.9);
    CHECK(r.adam_beta2 == 0.999);
    CHECK(r.adam_eps == 1e-8);
  }
  CHECK(wins >= 2);  // median over 3 seeds decreases
}

TEST_CASE("make_real_sequences window arithmetic") {
  std::vector<AnnotatedFrame> video;
  auto present_run = [&](int n) {
    for (int i = 0; i < n; ++i) video.push_back(disc_frame(64, 48, 32, 24, 6, uint32_t(i)));
  };
  auto gap = [&](int n) {
    for (int i = 0; i < n; ++i) video.push_back(empty_frame(64, 48, uint32_t(i)));
  };
  present_run(60);
  gap(2);
  present_run(20);  // too short for h + p = 21
  auto samples = make_real_sequences(video, nullptr, nullptr, 20, 1, true);
  CHECK(samples.size() == 40);

  video.clear();
  for (int i = 0; i < 30; ++i) {
    if (i % 2 == 0)
      present_run(1);
    else
      gap(1);
  }
  CHECK(make_real_sequences(video, nullptr, nullptr, 20, 1, true).empty());
}

TEST_CASE("ground-truth histories are teaching signals") {
  std::vector<AnnotatedFrame> video;
  for (int i = 0; i < 21; ++i) video.push_back(disc_frame(64, 48, 20.0 + i * 0.5, 24, 6, 1));
  auto samples = make_real_sequences(video, nullptr, nullptr, 20, 1, true);
  REQUIRE(samples.size() == 1);
  Heatmap expected = teaching_signal(video[0].second, kHeatmapWidth, kHeatmapHeight);
  CHECK(samples[0].history[0].values == expected.values);
  CHECK(samples[0].targets[0].values ==
        teaching_signal(video[20].second, kHeatmapWidth, kHeatmapHeight).values);
}

TEST_CASE("frozen detector survives joint training untouched") {
  ModelSpec spec = tiny_detector_spec();
  SweatyNet<float> detector(spec, 5);
  FusionGate<float> gate(detector.tap2_channels(), detector.tap6_channels(), 5);
  TemporalHeadSpec hspec;
  hspec.kind = HeadKind::TCN;
  hspec.history = 4;
  hspec.tcn_dilations = {1, 2};  // receptive field 7 covers history 4
  TemporalHead<float> head(hspec, 5);

  std::vector<AnnotatedFrame> video;
  for (int i = 0; i < 6; ++i) video.push_back(disc_frame(64, 48, 20.0 + i, 24, 6, uint32_t(i)));

  auto det_before = snapshot_tensors(detector.named_tensors());
  double w_before = gate.weight_value();
  TrainConfig cfg = TrainConfig::temporal_finetune();
  cfg.lr_detector = 0.0;  // frozen
  cfg.max_epochs = 2;
  TrainReport r = train_temporal_joint(cfg, detector, gate, head, {video});
  auto det_after = snapshot_tensors(detector.named_tensors());
  for (size_t i = 0; i < det_before.size(); ++i) CHECK(det_before[i].data == det_after[i].data);

  CHECK(std::isfinite(r.learned_w));
  CHECK(r.learned_w != w_before);  // the gate itself did train
  CHECK_FALSE(r.epoch_losses.empty());
}

TEST_CASE("temporal pretraining on synthetic windows learns") {
  auto seqs = generate_sequences(6, 16, 12, 3);
  std::vector<SequenceSample> samples;
  for (const auto& s : seqs) {
    auto w = cut_windows(s, 20, 1);
    samples.insert(samples.end(), w.begin(), w.end());
  }
  REQUIRE_FALSE(samples.empty());

  TemporalHeadSpec hspec;
  hspec.kind = HeadKind::TCN;
  TemporalHead<float> head(hspec, 2);
  TrainConfig cfg = TrainConfig::temporal_pretrain();
  cfg.lr_temporal = 1e-3;  // fast lr: this test only checks the loop plumbing
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  TrainReport r = train_temporal_on_samples(cfg, head, samples);
  REQUIRE(r.epoch_losses.size() == 3);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("sequence recall evaluator counts gamma hits") {
  // a "head" is exercised end to end with an identity-like scenario:
  // histories whose last frame already matches the target
  TemporalHeadSpec hspec;
  hspec.kind = HeadKind::TCN;
  TemporalHead<float> head(hspec, 2);
  auto seqs = generate_sequences(2, 16, 12, 9);
  std::vector<SequenceEvalCase> cases;
  for (const auto& s : seqs) {
    auto w = cut_windows(s, 20, 1);
    for (size_t i = 0; i < w.size(); ++i) {
      SequenceEvalCase c;
      c.sample = w[i];
      c.target_x = s.positions[i + 20].first;
      c.target_y = s.positions[i + 20].second;
      cases.push_back(std::move(c));
    }
  }
  double rc = evaluate_sequence_recall(head, cases, 1.0);
  CHECK(rc >= 0.0);
  CHECK(rc <= 1.0);
}

TEST_CASE("config files parse, override, and hash stably") {
  std::string path = (fs::temp_directory_path() / "trainer_cfg.txt").string();
  std::ofstream(path) << "# comment\ntrain.lr = 0.01\nmodel.variant = sweaty2\n\n";
  Config cfg = Config::from_file(path);
  CHECK(cfg.get_double("train.lr", 0) == 0.01);
  CHECK(cfg.get("model.variant", "") == "sweaty2");
  CHECK(cfg.get_int("missing.key", 7) == 7);
  std::string h1 = cfg.hash();
  cfg.set_kv("train.lr=0.02");
  CHECK(cfg.get_double("train.lr", 0) == 0.02);
  CHECK(cfg.hash() != h1);
  CHECK_THROWS_AS(cfg.set_kv("no_equals_sign"), DataError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/cfg.txt"), DataError);
}

TEST_CASE("train report serializes an epoch log plus summary") {
  TrainReport r;
  r.epoch_losses = {0.5, 0.25};
  r.learned_w = 0.57;
  std::string csv = r.to_csv();
  CHECK(csv.find("epoch,loss") != std::string::npos);
  CHECK(csv.find("0,0.5") != std::string::npos);
  CHECK(csv.find("learned_w,0.57") != std::string::npos);
  CHECK(csv.find("adam_beta1") != std::string::npos);
}
