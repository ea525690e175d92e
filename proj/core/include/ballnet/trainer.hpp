#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ballnet/adam.hpp"
#include "ballnet/ffnet.hpp"
#include "ballnet/metrics.hpp"
#include "ballnet/synthgen.hpp"
#include "ballnet/temporal.hpp"

namespace ballnet {

enum class TrainStage { Image, TemporalPretrainSynth, TemporalFinetuneReal };

struct TrainConfig {
  TrainStage stage = TrainStage::Image;
  double lr_detector = 0.001;
  double lr_temporal = 0.0;
  int batch_size = 4;
  int max_epochs = 100;
  int max_steps = 0;  // 0 = epochs only
  double dropout_p = 0.0;
  uint32_t seed = 0;
  std::string checkpoint_path;                 // empty = no checkpointing
  bool history_from_ground_truth = false;      // real sequences: teaching signals
                                               // instead of detector outputs

  static TrainConfig image_stage();            // lr 1e-3, batch 4, <=100 epochs
  static TrainConfig temporal_pretrain();      // lr 1e-5, 20 epochs
  static TrainConfig temporal_finetune();      // det 1e-5 / temporal 1e-4, 30 epochs
};

struct TrainReport {
  std::vector<double> epoch_losses;
  MetricSet train_metrics, test_metrics;
  double learned_w = 0;
  double wall_seconds = 0;
  bool aborted_on_nan = false;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  /// Comma-separated epoch log followed by a summary block.
  std::string to_csv() const;
};

/// Inference over annotated frames: forward in eval mode, postprocess,
/// classify against the gamma rule.
ConfusionCounts evaluate_detector(SweatyNet<float>& model, const std::vector<AnnotatedFrame>& data,
                                  double a_min, int batch_size = 8);

/// Stage 1: minimize MSE between predicted heatmap and the teaching signal
/// with Adam. Checkpoints (when a path is configured) are written whenever
/// test F1 improves; a NaN loss aborts with the last epoch's weights restored.
TrainReport train_image_stage(const TrainConfig& cfg, SweatyNet<float>& model,
                              const std::vector<AnnotatedFrame>& train,
                              const std::vector<AnnotatedFrame>& test);

/// Head-only training on precut (history, target) windows; used for the
/// synthetic pretraining stage where rendered heatmaps feed the head directly.
TrainReport train_temporal_on_samples(const TrainConfig& cfg, TemporalHead<float>& head,
                                      const std::vector<SequenceSample>& train);

/// Joint finetuning of detector, fusion gate, and head on real annotated
/// videos with per-component learning rates. History heatmaps are produced
/// by the detector (teacher-forced) inside the graph; a frozen detector
/// (lr 0) stays in eval mode so its batchnorm statistics never move.
TrainReport train_temporal_joint(const TrainConfig& cfg, SweatyNet<float>& detector,
                                 FusionGate<float>& gate, TemporalHead<float>& head,
                                 const std::vector<std::vector<AnnotatedFrame>>& videos);

/// Splits a time-ordered annotated video into maximal ball-present runs,
/// discards runs shorter than h+p (with a warning), and cuts stride-1
/// windows. Histories come from the fused detector output unless
/// use_ground_truth, targets are always teaching signals.
std::vector<SequenceSample> make_real_sequences(const std::vector<AnnotatedFrame>& video,
                                                SweatyNet<float>* detector,
                                                FusionGate<float>* gate, int h, int p,
                                                bool use_ground_truth);

/// One evaluation window with the ground-truth target center (or absent).
struct SequenceEvalCase {
  SequenceSample sample;
  bool has_ball = true;
  double target_x = 0, target_y = 0;
};

/// Fraction of ball windows whose predicted center lands within gamma.
double evaluate_sequence_recall(TemporalHead<float>& head,
                                const std::vector<SequenceEvalCase>& cases, double a_min,
                                double gamma = kMatchDistance, int batch_size = 16);

// Parameter snapshot/restore, used for NaN recovery and freeze checks.
std::vector<Tensor<float>> snapshot_tensors(
    const std::vector<std::pair<std::string, Tensor<float>*>>& named);
void restore_tensors(const std::vector<std::pair<std::string, Tensor<float>*>>& named,
                     const std::vector<Tensor<float>>& snap);

}  // namespace ballnet
