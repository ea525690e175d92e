#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ballnet/checkpoint.hpp"
#include "ballnet/config.hpp"
#include "ballnet/image_io.hpp"
#include "ballnet/metrics.hpp"
#include "ballnet/plotting.hpp"
#include "ballnet/postproc.hpp"
#include "ballnet/synthgen.hpp"
#include "ballnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace ballnet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  uint32_t seed = 0;
};

/// Flag values land in `pending`; after parsing, file < --set < flags.
struct ConfigBuilder {
  std::vector<std::pair<CLI::Option*, std::pair<std::string, std::string>*>> bound;
  std::vector<std::unique_ptr<std::pair<std::string, std::string>>> storage;

  CLI::Option* bind(CLI::App* cmd, const std::string& flag, const std::string& key,
                    const std::string& def, const std::string& desc) {
    storage.push_back(std::make_unique<std::pair<std::string, std::string>>(key, def));
    auto* slot = storage.back().get();
    auto* opt = cmd->add_option(flag, slot->second, desc + " [" + def + "]");
    bound.emplace_back(opt, slot);
    return opt;
  }

  Config build(const Common& common) const {
    Config cfg;
    for (const auto& s : storage) cfg.set(s->first, s->second);  // defaults
    if (!common.config_path.empty()) {
      Config file = Config::from_file(common.config_path);
      for (const auto& [k, v] : file.values()) cfg.set(k, v);
    }
    for (const auto& kv : common.sets) cfg.set_kv(kv);
    for (const auto& [opt, slot] : bound)
      if (opt->count() > 0) cfg.set(slot->first, slot->second);
    cfg.set("seed", std::to_string(common.seed));
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value configuration file");
  cmd->add_option("--set", c.sets, "override: key=value (repeatable)");
  cmd->add_option("--out", c.out_dir, "artifact directory [out]");
  cmd->add_option("--seed", c.seed, "random seed [0]");
}

void write_manifest(const std::string& out_dir, const Config& cfg,
                    const std::vector<std::string>& artifacts) {
  std::ofstream m(out_dir + "/manifest.txt");
  m << "config_hash," << cfg.hash() << "\n";
  for (const auto& a : artifacts) m << a << "," << cfg.hash() << "\n";
}

ModelSpec model_spec_from_config(const Config& cfg) {
  ModelSpec spec;
  spec.variant = variant_from_name(cfg.get("model.variant", "sweaty1"));
  spec.base_channels = cfg.get_int("model.base_channels", 8);
  spec.dropout_p = cfg.get_double("model.dropout", 0.0);
  spec.input_width = cfg.get_int("model.input_width", 640);
  spec.input_height = cfg.get_int("model.input_height", 480);
  spec.validate();
  return spec;
}

/// Reads only the metadata block of a checkpoint.
nlohmann::json checkpoint_meta(const std::string& path) {
  return load_checkpoint<float>(path, {});
}

SweatyNet<float> load_detector(const std::string& path, nlohmann::json* meta_out = nullptr) {
  nlohmann::json meta = checkpoint_meta(path);
  SweatyNet<float> model(model_spec_from_json(meta.at("model_spec")), 0);
  load_checkpoint<float>(path, model.named_tensors());
  if (meta_out) *meta_out = std::move(meta);
  return model;
}

std::string metric_row(const std::string& name, const MetricSet& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.4f", name.c_str(), m.fdr, m.pr, m.rc,
                m.f1, m.acc);
  return buf;
}

int run_train(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  ModelSpec spec = model_spec_from_config(cfg);
  auto [train, test] = load_annotations(cfg.get("data.annotations", ""),
                                        cfg.get_double("data.split", 0.7), common.seed);

  TrainConfig tc = TrainConfig::image_stage();
  tc.lr_detector = cfg.get_double("train.lr", tc.lr_detector);
  tc.batch_size = cfg.get_int("train.batch", tc.batch_size);
  tc.max_epochs = cfg.get_int("train.epochs", tc.max_epochs);
  tc.max_steps = cfg.get_int("train.steps", 0);
  tc.dropout_p = spec.dropout_p;
  tc.seed = common.seed;
  tc.checkpoint_path = common.out_dir + "/detector.ckpt";

  SweatyNet<float> model(spec, common.seed);
  TrainReport report = train_image_stage(tc, model, train, test);

  std::string report_path = common.out_dir + "/train_report.csv";
  std::ofstream(report_path) << report.to_csv();
  write_manifest(common.out_dir, cfg, {"detector.ckpt", "train_report.csv"});
  std::cout << metric_row("train", report.train_metrics) << "\n"
            << metric_row("test", report.test_metrics) << "\n";
  if (report.aborted_on_nan) {
    std::cerr << "training aborted on non-finite loss; last good weights kept\n";
    return kExitNumeric;
  }
  return 0;
}

int run_pretrain(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  TemporalHeadSpec hspec;
  hspec.kind = head_from_name(cfg.get("head.kind", "tcn"));
  hspec.validate();
  const int w = cfg.get_int("pretrain.width", kHeatmapWidth);
  const int h = cfg.get_int("pretrain.height", kHeatmapHeight);

  auto seqs = generate_sequences(cfg.get_int("pretrain.n", 200), w, h, common.seed);
  std::vector<SequenceSample> samples;
  const int stride = cfg.get_int("pretrain.stride", 1);
  for (const auto& s : seqs) {
    auto windows = cut_windows(s, hspec.history, hspec.horizon, stride);
    samples.insert(samples.end(), windows.begin(), windows.end());
  }

  TrainConfig tc = TrainConfig::temporal_pretrain();
  tc.lr_temporal = cfg.get_double("pretrain.lr", tc.lr_temporal);
  tc.max_epochs = cfg.get_int("pretrain.epochs", tc.max_epochs);
  tc.batch_size = cfg.get_int("pretrain.batch", tc.batch_size);
  tc.seed = common.seed;

  TemporalHead<float> head(hspec, common.seed);
  TrainReport report = train_temporal_on_samples(tc, head, samples);

  std::string ckpt = common.out_dir + "/head_" + head_name(hspec.kind) + ".ckpt";
  nlohmann::json meta;
  meta["head_spec"] = head_spec_to_json(hspec);
  save_checkpoint<float>(ckpt, meta, head.named_tensors());
  std::string report_path = common.out_dir + "/pretrain_report.csv";
  std::ofstream(report_path) << report.to_csv();
  write_manifest(common.out_dir, cfg,
                 {fs::path(ckpt).filename().string(), "pretrain_report.csv"});
  if (report.aborted_on_nan) return kExitNumeric;
  return 0;
}

int run_finetune(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  std::string det_path = cfg.get("finetune.detector_ckpt", "");
  if (det_path.empty() || !fs::exists(det_path))
    throw DataError("detector checkpoint not found: " + (det_path.empty() ? "(unset)" : det_path));
  nlohmann::json det_meta;
  SweatyNet<float> detector = load_detector(det_path, &det_meta);

  TemporalHeadSpec hspec;
  hspec.kind = head_from_name(cfg.get("head.kind", "tcn"));
  std::string head_path = cfg.get("finetune.head_ckpt", "");
  TemporalHead<float> head(hspec, common.seed);
  if (!head_path.empty()) {
    nlohmann::json hmeta = checkpoint_meta(head_path);
    hspec = head_spec_from_json(hmeta.at("head_spec"));
    head = TemporalHead<float>(hspec, common.seed);
    load_checkpoint<float>(head_path, head.named_tensors());
  }
  FusionGate<float> gate(detector.tap2_channels(), detector.tap6_channels(), common.seed);

  // Video frames stay in file order; no shuffled split here.
  std::vector<AnnotatedFrame> video;
  int t = 0;
  for (const auto& rec : parse_annotation_index(cfg.get("data.annotations", ""))) {
    ImageFrame f = load_image(rec.image_path);
    f.timestamp_index = t++;
    video.emplace_back(std::move(f), rec.box);
  }
  std::vector<std::vector<AnnotatedFrame>> videos = {std::move(video)};

  TrainConfig tc = TrainConfig::temporal_finetune();
  tc.lr_detector = cfg.get_double("finetune.lr_detector", tc.lr_detector);
  tc.lr_temporal = cfg.get_double("finetune.lr_temporal", tc.lr_temporal);
  tc.max_epochs = cfg.get_int("finetune.epochs", tc.max_epochs);
  tc.history_from_ground_truth = cfg.get_bool("finetune.ground_truth_history", false);
  tc.seed = common.seed;

  TrainReport report = train_temporal_joint(tc, detector, gate, head, videos);

  std::string ckpt = common.out_dir + "/joint_" + head_name(hspec.kind) + ".ckpt";
  nlohmann::json meta;
  meta["model_spec"] = model_spec_to_json(detector.spec());
  meta["head_spec"] = head_spec_to_json(hspec);
  if (det_meta.contains("a_min")) meta["a_min"] = det_meta["a_min"];
  auto tensors = detector.named_tensors();
  auto ht = head.named_tensors();
  auto gt = gate.named_tensors();
  tensors.insert(tensors.end(), ht.begin(), ht.end());
  tensors.insert(tensors.end(), gt.begin(), gt.end());
  save_checkpoint<float>(ckpt, meta, tensors);

  std::string report_path = common.out_dir + "/finetune_report.csv";
  std::ofstream(report_path) << report.to_csv();
  write_manifest(common.out_dir, cfg,
                 {fs::path(ckpt).filename().string(), "finetune_report.csv"});
  std::cout << "learned_w," << report.learned_w << "\n";
  if (report.aborted_on_nan) return kExitNumeric;
  return 0;
}

int run_eval(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  std::string ckpt = cfg.get("eval.ckpt", "");
  if (ckpt.empty() || !fs::exists(ckpt))
    throw DataError("checkpoint not found: " + (ckpt.empty() ? "(unset)" : ckpt));
  nlohmann::json meta;
  SweatyNet<float> model = load_detector(ckpt, &meta);

  auto [train, test] = load_annotations(cfg.get("data.annotations", ""),
                                        cfg.get_double("data.split", 0.7), common.seed);
  double a_min = cfg.get_double("eval.a_min", 0.0);
  if (a_min <= 0.0) a_min = meta.value("a_min", 0.0);

  MetricSet mtr = compute_metrics(evaluate_detector(model, train, a_min));
  MetricSet mte = compute_metrics(evaluate_detector(model, test, a_min));
  std::string table = "split,FDR,PR,RC,F1,Acc\n" + metric_row("train", mtr) + "\n" +
                      metric_row("test", mte) + "\n";
  std::cout << table;
  std::ofstream(common.out_dir + "/eval.csv") << table;
  write_manifest(common.out_dir, cfg, {"eval.csv"});
  return 0;
}

int run_infer(const Common& common, const Config& cfg, const std::vector<std::string>& images) {
  std::string ckpt = cfg.get("infer.ckpt", "");
  if (ckpt.empty() || !fs::exists(ckpt))
    throw DataError("checkpoint not found: " + (ckpt.empty() ? "(unset)" : ckpt));
  nlohmann::json meta;
  SweatyNet<float> model = load_detector(ckpt, &meta);
  double a_min = cfg.get_double("infer.a_min", 0.0);
  if (a_min <= 0.0) a_min = meta.value("a_min", 0.0);
  const ModelSpec& spec = model.spec();

  for (const auto& path : images) {
    ImageFrame frame = load_image(path, spec.input_width, spec.input_height);
    Tape<float> tape;
    auto input = make_var<float>(frames_to_tensor<float>({&frame}, spec), false);
    auto out = model.forward(tape, input, /*training=*/false);
    BallCenter c = extract_center(tensor_to_heatmap(out.heatmap->value, 0), a_min);
    std::cout << path << "," << c.x << "," << c.y << "\n";
  }
  return 0;
}

int run_synth(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  const int n = cfg.get_int("synth.n", 10);
  const int w = cfg.get_int("synth.width", kHeatmapWidth);
  const int h = cfg.get_int("synth.height", kHeatmapHeight);
  auto seqs = generate_sequences(n, w, h, common.seed);
  std::vector<std::string> artifacts;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04d.seq", i);
    save_sequence(seqs[size_t(i)], common.out_dir + "/" + name);
    artifacts.emplace_back(name);
  }
  write_manifest(common.out_dir, cfg, artifacts);
  return 0;
}

int run_bench(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  const int trials = cfg.get_int("bench.trials", 30);
  const int warmup = cfg.get_int("bench.warmup", 5);
  const int w = cfg.get_int("bench.width", 64);
  const int h = cfg.get_int("bench.height", 48);

  ModelSpec spec = model_spec_from_config(cfg);
  spec.input_width = w * kDownsampleFactor;
  spec.input_height = h * kDownsampleFactor;
  SweatyNet<float> detector(spec, common.seed);
  Tensor<float> image({1, spec.input_height, spec.input_width, 3});
  std::mt19937 rng(common.seed);
  uniform_init(image, 0.5, rng);

  TemporalHeadSpec hspec;
  std::vector<std::unique_ptr<TemporalHead<float>>> heads;
  std::vector<std::pair<std::string, std::function<void()>>> methods;
  methods.emplace_back(variant_name(spec.variant), [&] {
    Tape<float> tape;
    auto in = make_var<float>(image, false);
    detector.forward(tape, in, false);
  });
  Tensor<float> frame({1, h, w, 1});
  uniform_init(frame, 0.2, rng);
  for (HeadKind kind : {HeadKind::TCN, HeadKind::ConvLSTM, HeadKind::ConvGRU}) {
    hspec.kind = kind;
    heads.push_back(std::make_unique<TemporalHead<float>>(hspec, common.seed));
    auto* head = heads.back().get();
    methods.emplace_back(head_name(kind), [head, &frame, &hspec] {
      Tape<float> tape;
      std::vector<VarPtr<float>> history(size_t(hspec.history),
                                         make_var<float>(frame, false));
      head->predict(tape, history);
    });
  }

  LatencyReport report = benchmark_latency(methods, trials, warmup);
  std::string csv = report.to_csv();
  std::cout << csv;
  std::ofstream(common.out_dir + "/latency.csv") << csv;
  write_manifest(common.out_dir, cfg, {"latency.csv"});
  return 0;
}

int run_plot(const Common& common, const Config& cfg) {
  fs::create_directories(common.out_dir);
  std::string heatmap_ckpt = cfg.get("plot.sequence", "");
  if (heatmap_ckpt.empty() || !fs::exists(heatmap_ckpt))
    throw DataError("sequence file not found: " +
                    (heatmap_ckpt.empty() ? "(unset)" : heatmap_ckpt));
  SyntheticSequence seq = load_sequence(heatmap_ckpt);
  std::vector<std::string> artifacts;
  for (size_t i = 0; i < seq.heatmaps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", i);
    save_heatmap_panel(seq.heatmaps[i], common.out_dir + "/" + name);
    artifacts.emplace_back(name);
  }
  save_trajectory_overlay(seq, common.out_dir + "/trajectory.png");
  artifacts.emplace_back("trajectory.png");
  write_manifest(common.out_dir, cfg, artifacts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ball detection and temporal prediction toolkit"};
  app.require_subcommand(1);

  Common common;
  ConfigBuilder cb;
  std::vector<std::string> infer_images;

  auto* train = app.add_subcommand("train", "single-image detector training");
  add_common(train, common);
  cb.bind(train, "--annotations", "data.annotations", "", "annotation index file");
  cb.bind(train, "--split", "data.split", "0.7", "train fraction");
  cb.bind(train, "--variant", "model.variant", "sweaty1", "sweaty1|sweaty2|sweaty3");
  cb.bind(train, "--base-channels", "model.base_channels", "8", "width multiplier");
  cb.bind(train, "--dropout", "model.dropout", "0", "spatial dropout p");
  cb.bind(train, "--input-width", "model.input_width", "640", "detector input width");
  cb.bind(train, "--input-height", "model.input_height", "480", "detector input height");
  cb.bind(train, "--lr", "train.lr", "0.001", "learning rate");
  cb.bind(train, "--batch", "train.batch", "4", "batch size");
  cb.bind(train, "--epochs", "train.epochs", "100", "epoch cap");
  cb.bind(train, "--steps", "train.steps", "0", "optimizer step cap (0 = epochs only)");

  auto* pre = app.add_subcommand("pretrain-temporal", "head pretraining on synthetic sequences");
  add_common(pre, common);
  cb.bind(pre, "--head", "head.kind", "tcn", "tcn|convlstm|convgru");
  cb.bind(pre, "--n", "pretrain.n", "200", "sequence count");
  cb.bind(pre, "--epochs", "pretrain.epochs", "20", "epoch cap");
  cb.bind(pre, "--lr", "pretrain.lr", "1e-5", "learning rate");
  cb.bind(pre, "--batch", "pretrain.batch", "1", "windows per step");
  cb.bind(pre, "--stride", "pretrain.stride", "1", "window stride");
  cb.bind(pre, "--width", "pretrain.width", "160", "heatmap width");
  cb.bind(pre, "--height", "pretrain.height", "120", "heatmap height");

  auto* ft = app.add_subcommand("finetune-temporal", "joint finetuning on real sequences");
  add_common(ft, common);
  cb.bind(ft, "--ckpt", "finetune.detector_ckpt", "", "image-stage detector checkpoint");
  cb.bind(ft, "--head-ckpt", "finetune.head_ckpt", "", "pretrained head (empty = fresh)");
  cb.bind(ft, "--head", "head.kind", "tcn", "tcn|convlstm|convgru");
  cb.bind(ft, "--annotations", "data.annotations", "", "time-ordered video annotations");
  cb.bind(ft, "--epochs", "finetune.epochs", "30", "epoch cap");
  cb.bind(ft, "--lr-detector", "finetune.lr_detector", "1e-5", "detector learning rate");
  cb.bind(ft, "--lr-temporal", "finetune.lr_temporal", "1e-4", "head + gate learning rate");
  cb.bind(ft, "--ground-truth-history", "finetune.ground_truth_history", "false",
          "teaching signals instead of detector outputs");

  auto* ev = app.add_subcommand("eval", "detector metrics table");
  add_common(ev, common);
  cb.bind(ev, "--ckpt", "eval.ckpt", "", "detector checkpoint");
  cb.bind(ev, "--annotations", "data.annotations", "", "annotation index file");
  cb.bind(ev, "--split", "data.split", "0.7", "train fraction");
  cb.bind(ev, "--a-min", "eval.a_min", "0", "contour area gate override");

  auto* inf = app.add_subcommand("infer", "print image_path,c_x,c_y per frame");
  add_common(inf, common);
  cb.bind(inf, "--ckpt", "infer.ckpt", "", "detector checkpoint");
  cb.bind(inf, "--a-min", "infer.a_min", "0", "contour area gate override");
  inf->add_option("images", infer_images, "image files")->required();

  auto* sy = app.add_subcommand("synth", "generate synthetic sequence files");
  add_common(sy, common);
  cb.bind(sy, "--n", "synth.n", "10", "sequence count");
  cb.bind(sy, "--width", "synth.width", "160", "heatmap width");
  cb.bind(sy, "--height", "synth.height", "120", "heatmap height");

  auto* be = app.add_subcommand("bench", "latency table, detector and heads");
  add_common(be, common);
  cb.bind(be, "--trials", "bench.trials", "30", "timed runs per method");
  cb.bind(be, "--warmup", "bench.warmup", "5", "discarded runs per method");
  cb.bind(be, "--variant", "model.variant", "sweaty1", "detector variant");
  cb.bind(be, "--width", "bench.width", "64", "heatmap width");
  cb.bind(be, "--height", "bench.height", "48", "heatmap height");

  auto* pl = app.add_subcommand("plot", "render a sequence file as images");
  add_common(pl, common);
  cb.bind(pl, "--sequence", "plot.sequence", "", "sequence file from synth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Config cfg = cb.build(common);
    if (train->parsed()) return run_train(common, cfg);
    if (pre->parsed()) return run_pretrain(common, cfg);
    if (ft->parsed()) return run_finetune(common, cfg);
    if (ev->parsed()) return run_eval(common, cfg);
    if (inf->parsed()) return run_infer(common, cfg, infer_images);
    if (sy->parsed()) return run_synth(common, cfg);
    if (be->parsed()) return run_bench(common, cfg);
    if (pl->parsed()) return run_plot(common, cfg);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
