#include "ballnet/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ballnet/errors.hpp"

namespace ballnet {

FrameClass classify_frame(const BallCenter& pred, const BoundingBoxAnnotation& truth,
                          double gamma) {
  if (truth.present) {
    if (!pred.detected()) return FrameClass::FN;
    double dx = pred.x - truth.center_x();
    double dy = pred.y - truth.center_y();
    return std::sqrt(dx * dx + dy * dy) <= gamma ? FrameClass::TP : FrameClass::FP;
  }
  return pred.detected() ? FrameClass::FP : FrameClass::TN;
}

void accumulate(ConfusionCounts& c, FrameClass cls) {
  switch (cls) {
    case FrameClass::TP: ++c.tp; break;
    case FrameClass::FP: ++c.fp; break;
    case FrameClass::FN: ++c.fn; break;
    case FrameClass::TN: ++c.tn; break;
  }
}

MetricSet compute_metrics(const ConfusionCounts& c) {
  MetricSet m;
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn), tn = double(c.tn);
  if (tp + fp > 0) {
    m.fdr = fp / (fp + tp);
    m.pr = tp / (tp + fp);
  } else {
    m.fdr = 0;
    m.pr = 1;
  }
  m.rc = (tp + fn > 0) ? tp / (tp + fn) : 1;
  m.f1 = (m.pr + m.rc > 0) ? 2 * m.pr * m.rc / (m.pr + m.rc) : 0;
  const double total = tp + fp + fn + tn;
  m.acc = total > 0 ? (tp + tn) / total : 0;
  return m;
}

std::string LatencyReport::to_csv() const {
  std::ostringstream os;
  os << "name,median_ms,p95_ms,n_trials,warmup_trials\n";
  for (const auto& e : entries)
    os << e.name << "," << e.median_ms << "," << e.p95_ms << "," << e.n_trials << ","
       << warmup_trials << "\n";
  return os.str();
}

LatencyReport benchmark_latency(
    const std::vector<std::pair<std::string, std::function<void()>>>& methods, int trials,
    int warmup) {
  if (trials < 30) throw DataError("benchmark_latency: need at least 30 trials");
  LatencyReport report;
  report.warmup_trials = warmup;
  for (const auto& [name, fn] : methods)
    for (int i = 0; i < warmup; ++i) fn();
  // trials are interleaved round-robin so clock-speed drift hits every
  // method equally instead of biasing whichever ran last
  std::vector<std::vector<double>> samples(methods.size());
  for (auto& s : samples) s.reserve(size_t(trials));
  for (int i = 0; i < trials; ++i)
    for (size_t m = 0; m < methods.size(); ++m) {
      auto t0 = std::chrono::steady_clock::now();
      methods[m].second();
      auto t1 = std::chrono::steady_clock::now();
      samples[m].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  for (size_t m = 0; m < methods.size(); ++m) {
    const auto& name = methods[m].first;
    std::vector<double>& ms = samples[m];
    std::sort(ms.begin(), ms.end());
    auto quantile = [&ms](double q) {
      double pos = q * double(ms.size() - 1);
      size_t lo = size_t(pos);
      size_t hi = std::min(lo + 1, ms.size() - 1);
      double frac = pos - double(lo);
      return ms[lo] * (1 - frac) + ms[hi] * frac;
    };
    report.entries.push_back({name, quantile(0.5), quantile(0.95), trials});
  }
  return report;
}

}  // namespace ballnet
