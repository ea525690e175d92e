#include "ballnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "ballnet/checkpoint.hpp"
#include "ballnet/postproc.hpp"

namespace ballnet {

TrainConfig TrainConfig::image_stage() {
  TrainConfig c;
  c.stage = TrainStage::Image;
  c.lr_detector = 0.001;
  c.batch_size = 4;
  c.max_epochs = 100;
  return c;
}

TrainConfig TrainConfig::temporal_pretrain() {
  TrainConfig c;
  c.stage = TrainStage::TemporalPretrainSynth;
  c.lr_detector = 0;
  c.lr_temporal = 1e-5;
  c.batch_size = 1;
  c.max_epochs = 20;
  return c;
}

TrainConfig TrainConfig::temporal_finetune() {
  TrainConfig c;
  c.stage = TrainStage::TemporalFinetuneReal;
  c.lr_detector = 1e-5;
  c.lr_temporal = 1e-4;
  c.batch_size = 1;
  c.max_epochs = 30;
  return c;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os << "epoch,loss\n";
  for (size_t i = 0; i < epoch_losses.size(); ++i) os << i << "," << epoch_losses[i] << "\n";
  os << "\n";
  os << "summary,value\n";
  os << "train_f1," << train_metrics.f1 << "\n";
  os << "train_recall," << train_metrics.rc << "\n";
  os << "test_f1," << test_metrics.f1 << "\n";
  os << "test_recall," << test_metrics.rc << "\n";
  os << "learned_w," << learned_w << "\n";
  os << "wall_seconds," << wall_seconds << "\n";
  os << "aborted_on_nan," << (aborted_on_nan ? 1 : 0) << "\n";
  os << "adam_beta1," << adam_beta1 << "\n";
  os << "adam_beta2," << adam_beta2 << "\n";
  os << "adam_eps," << adam_eps << "\n";
  return os.str();
}

std::vector<Tensor<float>> snapshot_tensors(
    const std::vector<std::pair<std::string, Tensor<float>*>>& named) {
  std::vector<Tensor<float>> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(*t);
  return out;
}

void restore_tensors(const std::vector<std::pair<std::string, Tensor<float>*>>& named,
                     const std::vector<Tensor<float>>& snap) {
  for (size_t i = 0; i < named.size(); ++i) *named[i].second = snap[i];
}

namespace {

Tensor<float> target_tensor(const std::vector<const BoundingBoxAnnotation*>& boxes, int out_w,
                            int out_h) {
  Tensor<float> t({int64_t(boxes.size()), out_h, out_w, 1});
  for (size_t i = 0; i < boxes.size(); ++i) {
    Heatmap g = teaching_signal(*boxes[i], out_w, out_h);
    for (size_t j = 0; j < g.values.size(); ++j)
      t[int64_t(i) * out_w * out_h + int64_t(j)] = float(g.values[j]);
  }
  return t;
}

double detector_a_min(const std::vector<AnnotatedFrame>& train, int out_w, int out_h) {
  std::vector<BoundingBoxAnnotation> boxes;
  for (const auto& [f, b] : train)
    if (b.present) boxes.push_back(b);
  if (boxes.empty()) return 0.0;
  return estimate_a_min(boxes, out_w, out_h);
}

}  // namespace

ConfusionCounts evaluate_detector(SweatyNet<float>& model, const std::vector<AnnotatedFrame>& data,
                                  double a_min, int batch_size) {
  ConfusionCounts counts;
  for (size_t i = 0; i < data.size(); i += size_t(batch_size)) {
    size_t end = std::min(data.size(), i + size_t(batch_size));
    std::vector<const ImageFrame*> frames;
    for (size_t j = i; j < end; ++j) frames.push_back(&data[j].first);
    Tape<float> tape;
    auto input = make_var<float>(frames_to_tensor<float>(frames, model.spec()), false);
    auto out = model.forward(tape, input, /*training=*/false);
    for (size_t j = i; j < end; ++j) {
      Heatmap hm = tensor_to_heatmap(out.heatmap->value, int64_t(j - i));
      BallCenter pred = extract_center(hm, a_min);
      accumulate(counts, classify_frame(pred, data[j].second));
    }
  }
  return counts;
}

TrainReport train_image_stage(const TrainConfig& cfg, SweatyNet<float>& model,
                              const std::vector<AnnotatedFrame>& train,
                              const std::vector<AnnotatedFrame>& test) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  const int out_w = model.spec().output_width(), out_h = model.spec().output_height();
  const double a_min = detector_a_min(train, out_w, out_h);

  Adam<float> opt(model.parameters(), cfg.lr_detector);
  report.adam_beta1 = opt.beta1();
  report.adam_beta2 = opt.beta2();
  report.adam_eps = opt.eps();

  std::mt19937 rng(cfg.seed);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t(0));

  auto named = model.named_tensors();
  auto last_good = snapshot_tensors(named);
  double best_f1 = -1;
  int step = 0;
  bool done = false;

  for (int epoch = 0; epoch < cfg.max_epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int loss_n = 0;
    for (size_t i = 0; i < order.size() && !done; i += size_t(cfg.batch_size)) {
      size_t end = std::min(order.size(), i + size_t(cfg.batch_size));
      std::vector<const ImageFrame*> frames;
      std::vector<const BoundingBoxAnnotation*> boxes;
      for (size_t j = i; j < end; ++j) {
        frames.push_back(&train[order[j]].first);
        boxes.push_back(&train[order[j]].second);
      }
      Tape<float> tape;
      auto input = make_var<float>(frames_to_tensor<float>(frames, model.spec()), false);
      auto out = model.forward(tape, input, /*training=*/true, &rng);
      auto loss = nn::mse_loss(tape, out.heatmap, target_tensor(boxes, out_w, out_h));
      if (!std::isfinite(loss->value[0])) {
        restore_tensors(named, last_good);
        report.aborted_on_nan = true;
        done = true;
        break;
      }
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += loss->value[0];
      ++loss_n;
      if (cfg.max_steps > 0 && ++step >= cfg.max_steps) done = true;
    }
    if (loss_n) report.epoch_losses.push_back(loss_sum / loss_n);
    if (report.aborted_on_nan) break;
    last_good = snapshot_tensors(named);
    if (!test.empty()) {
      MetricSet m = compute_metrics(evaluate_detector(model, test, a_min));
      if (m.f1 > best_f1) {
        best_f1 = m.f1;
        if (!cfg.checkpoint_path.empty()) {
          nlohmann::json meta;
          meta["model_spec"] = model_spec_to_json(model.spec());
          meta["epoch"] = epoch;
          meta["test_f1"] = m.f1;
          meta["a_min"] = a_min;
          save_checkpoint<float>(cfg.checkpoint_path, meta, named);
        }
      }
    }
  }

  report.train_metrics = compute_metrics(evaluate_detector(model, train, a_min));
  if (!test.empty()) report.test_metrics = compute_metrics(evaluate_detector(model, test, a_min));
  if (!cfg.checkpoint_path.empty() && test.empty()) {
    nlohmann::json meta;
    meta["model_spec"] = model_spec_to_json(model.spec());
    meta["a_min"] = a_min;
    save_checkpoint<float>(cfg.checkpoint_path, meta, named);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

namespace {

// One batched history: frame t of every window stacked along N.
std::vector<VarPtr<float>> batch_history(const std::vector<const SequenceSample*>& windows) {
  const int h = int(windows[0]->history.size());
  std::vector<VarPtr<float>> frames;
  frames.reserve(size_t(h));
  for (int t = 0; t < h; ++t) {
    std::vector<const Heatmap*> maps;
    for (const auto* w : windows) maps.push_back(&w->history[size_t(t)]);
    frames.push_back(make_var<float>(heatmaps_to_tensor<float>(maps), false));
  }
  return frames;
}

Tensor<float> batch_targets(const std::vector<const SequenceSample*>& windows, int t) {
  std::vector<const Heatmap*> maps;
  for (const auto* w : windows) maps.push_back(&w->targets[size_t(t)]);
  return heatmaps_to_tensor<float>(maps);
}

}  // namespace

TrainReport train_temporal_on_samples(const TrainConfig& cfg, TemporalHead<float>& head,
                                      const std::vector<SequenceSample>& train) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  Adam<float> opt(head.parameters(), cfg.lr_temporal);
  report.adam_beta1 = opt.beta1();
  report.adam_beta2 = opt.beta2();
  report.adam_eps = opt.eps();

  std::mt19937 rng(cfg.seed);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t(0));

  auto named = head.named_tensors();
  auto last_good = snapshot_tensors(named);
  int step = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.max_epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int loss_n = 0;
    for (size_t i = 0; i < order.size() && !done; i += size_t(cfg.batch_size)) {
      size_t end = std::min(order.size(), i + size_t(cfg.batch_size));
      std::vector<const SequenceSample*> windows;
      for (size_t j = i; j < end; ++j) windows.push_back(&train[order[j]]);
      Tape<float> tape;
      auto preds = head.predict(tape, batch_history(windows));
      VarPtr<float> loss;
      for (int t = 0; t < int(preds.size()); ++t) {
        auto l = nn::mse_loss(tape, preds[size_t(t)], batch_targets(windows, t));
        loss = loss ? nn::add(tape, loss, l) : l;
      }
      if (!std::isfinite(loss->value[0])) {
        restore_tensors(named, last_good);
        report.aborted_on_nan = true;
        break;
      }
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += loss->value[0];
      ++loss_n;
      if (cfg.max_steps > 0 && ++step >= cfg.max_steps) done = true;
    }
    if (loss_n) report.epoch_losses.push_back(loss_sum / loss_n);
    if (report.aborted_on_nan) break;
    last_good = snapshot_tensors(named);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<SequenceSample> make_real_sequences(const std::vector<AnnotatedFrame>& video,
                                                SweatyNet<float>* detector,
                                                FusionGate<float>* gate, int h, int p,
                                                bool use_ground_truth) {
  std::vector<SequenceSample> out;
  std::vector<std::pair<size_t, size_t>> runs;  // [begin, end)
  size_t begin = 0;
  bool in_run = false;
  for (size_t i = 0; i <= video.size(); ++i) {
    bool present = i < video.size() && video[i].second.present;
    if (present && !in_run) {
      begin = i;
      in_run = true;
    } else if (!present && in_run) {
      runs.emplace_back(begin, i);
      in_run = false;
    }
  }
  for (auto [b, e] : runs) {
    if (int(e - b) < h + p) {
      std::cerr << "make_real_sequences: skipping run of length " << (e - b)
                << " (need " << h + p << ")\n";
      continue;
    }
    // Per-frame heatmaps for the run, computed once.
    std::vector<Heatmap> maps;
    maps.reserve(e - b);
    const int out_w = detector ? detector->spec().output_width() : kHeatmapWidth;
    const int out_h = detector ? detector->spec().output_height() : kHeatmapHeight;
    for (size_t i = b; i < e; ++i) {
      if (use_ground_truth || !detector) {
        maps.push_back(teaching_signal(video[i].second, out_w, out_h));
      } else {
        Tape<float> tape;
        auto input =
            make_var<float>(frames_to_tensor<float>({&video[i].first}, detector->spec()), false);
        auto o = detector->forward(tape, input, false);
        VarPtr<float> fused =
            gate ? gate->fuse(tape, o.heatmap, o.taps.block2, o.taps.block6) : o.heatmap;
        maps.push_back(tensor_to_heatmap(fused->value, 0));
      }
    }
    for (size_t start = 0; start + size_t(h + p) <= maps.size(); ++start) {
      SequenceSample s;
      s.history.assign(maps.begin() + start, maps.begin() + start + h);
      for (int t = 0; t < p; ++t) {
        const auto& box = video[b + start + size_t(h + t)].second;
        const int tw = detector ? detector->spec().output_width() : kHeatmapWidth;
        const int th = detector ? detector->spec().output_height() : kHeatmapHeight;
        s.targets.push_back(teaching_signal(box, tw, th));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

TrainReport train_temporal_joint(const TrainConfig& cfg, SweatyNet<float>& detector,
                                 FusionGate<float>& gate, TemporalHead<float>& head,
                                 const std::vector<std::vector<AnnotatedFrame>>& videos) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  const bool detector_trains = cfg.lr_detector > 0;
  const int h = head.spec().history, p = head.spec().horizon;
  const int out_w = detector.spec().output_width(), out_h = detector.spec().output_height();

  Adam<float> det_opt(detector.parameters(), cfg.lr_detector);
  std::vector<VarPtr<float>> temporal_params = head.parameters();
  for (auto& prm : gate.parameters()) temporal_params.push_back(prm);
  Adam<float> temp_opt(temporal_params, cfg.lr_temporal);
  report.adam_beta1 = temp_opt.beta1();
  report.adam_beta2 = temp_opt.beta2();
  report.adam_eps = temp_opt.eps();

  // Window index: (video, run start offset)
  struct WindowRef {
    size_t video;
    size_t start;  // first history frame
  };
  std::vector<WindowRef> windows;
  for (size_t v = 0; v < videos.size(); ++v) {
    const auto& video = videos[v];
    size_t begin = 0;
    bool in_run = false;
    auto close_run = [&](size_t end) {
      if (int(end - begin) < h + p) {
        std::cerr << "train_temporal_joint: skipping run of length " << (end - begin) << "\n";
        return;
      }
      for (size_t s = begin; s + size_t(h + p) <= end; ++s) windows.push_back({v, s});
    };
    for (size_t i = 0; i <= video.size(); ++i) {
      bool present = i < video.size() && video[i].second.present;
      if (present && !in_run) {
        begin = i;
        in_run = true;
      } else if (!present && in_run) {
        close_run(i);
        in_run = false;
      }
    }
  }

  std::mt19937 rng(cfg.seed);
  std::vector<size_t> order(windows.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int loss_n = 0;
    for (size_t oi : order) {
      const auto& wref = windows[oi];
      const auto& video = videos[wref.video];
      Tape<float> tape;
      std::vector<VarPtr<float>> history;
      history.reserve(size_t(h));
      for (int t = 0; t < h; ++t) {
        const auto& frame = video[wref.start + size_t(t)].first;
        auto input =
            make_var<float>(frames_to_tensor<float>({&frame}, detector.spec()), false);
        auto o = detector.forward(tape, input, detector_trains, &rng);
        history.push_back(gate.fuse(tape, o.heatmap, o.taps.block2, o.taps.block6));
      }
      auto preds = head.predict(tape, history);
      VarPtr<float> loss;
      for (int t = 0; t < p; ++t) {
        const auto& box = video[wref.start + size_t(h + t)].second;
        Heatmap g = teaching_signal(box, out_w, out_h);
        auto l = nn::mse_loss(tape, preds[size_t(t)], heatmaps_to_tensor<float>({&g}));
        loss = loss ? nn::add(tape, loss, l) : l;
      }
      if (!std::isfinite(loss->value[0])) {
        report.aborted_on_nan = true;
        break;
      }
      det_opt.zero_grad();
      temp_opt.zero_grad();
      tape.backward(loss);
      if (detector_trains) det_opt.step();
      temp_opt.step();
      loss_sum += loss->value[0];
      ++loss_n;
    }
    if (loss_n) report.epoch_losses.push_back(loss_sum / loss_n);
    if (report.aborted_on_nan) break;
  }
  report.learned_w = gate.weight_value();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

double evaluate_sequence_recall(TemporalHead<float>& head,
                                const std::vector<SequenceEvalCase>& cases, double a_min,
                                double gamma, int batch_size) {
  long hits = 0, total = 0;
  for (size_t i = 0; i < cases.size(); i += size_t(batch_size)) {
    size_t end = std::min(cases.size(), i + size_t(batch_size));
    std::vector<const SequenceSample*> windows;
    for (size_t j = i; j < end; ++j) windows.push_back(&cases[j].sample);
    Tape<float> tape;
    auto preds = head.predict(tape, batch_history(windows));
    for (size_t j = i; j < end; ++j) {
      if (!cases[j].has_ball) continue;
      ++total;
      Heatmap hm = tensor_to_heatmap(preds[0]->value, int64_t(j - i));
      BallCenter c = extract_center(hm, a_min);
      if (!c.detected()) continue;
      double dx = c.x - cases[j].target_x, dy = c.y - cases[j].target_y;
      if (std::sqrt(dx * dx + dy * dy) <= gamma) ++hits;
    }
  }
  return total ? double(hits) / double(total) : 0.0;
}

}  // namespace ballnet
