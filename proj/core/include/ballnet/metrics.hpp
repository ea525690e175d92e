#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ballnet/datamodel.hpp"

namespace ballnet {

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

enum class FrameClass { TP, FP, FN, TN };

inline constexpr double kMatchDistance = 5.0;  // gamma

/// A prediction counts as TP when a ball is present and the centers are within
/// gamma. A detection farther than gamma from a present ball counts as FP.
FrameClass classify_frame(const BallCenter& pred, const BoundingBoxAnnotation& truth,
                          double gamma = kMatchDistance);

void accumulate(ConfusionCounts& c, FrameClass cls);

struct MetricSet {
  double fdr = 0, pr = 1, rc = 1, f1 = 0, acc = 0;
};

/// FDR, PR, RC, F1, Acc with the conventional degenerate-denominator values
/// (PR=1/FDR=0 when TP+FP=0, RC=1 when TP+FN=0, F1=0 when PR+RC=0).
MetricSet compute_metrics(const ConfusionCounts& c);

struct LatencyReport {
  struct Entry {
    std::string name;
    double median_ms = 0;
    double p95_ms = 0;
    int n_trials = 0;
  };
  std::vector<Entry> entries;
  int warmup_trials = 0;

  std::string to_csv() const;
};

/// Wall-clock latency of each callable: warmup runs discarded, then `trials`
/// timed runs summarized by median and p95.
LatencyReport benchmark_latency(
    const std::vector<std::pair<std::string, std::function<void()>>>& methods, int trials,
    int warmup);

}  // namespace ballnet
