#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>
#include <thread>

#include "ballnet/metrics.hpp"

using namespace ballnet;

namespace {

// Independent recomputation, written from the formula definitions only.
struct Ref {
  double fdr, pr, rc, f1, acc;
};

Ref reference_metrics(long tp, long fp, long fn, long tn) {
  Ref r{};
  if (tp + fp == 0) {
    r.pr = 1.0;
    r.fdr = 0.0;
  } else {
    r.pr = double(tp) / double(tp + fp);
    r.fdr = double(fp) / double(fp + tp);
  }
  r.rc = (tp + fn == 0) ? 1.0 : double(tp) / double(tp + fn);
  r.f1 = (r.pr + r.rc == 0) ? 0.0 : 2.0 * r.pr * r.rc / (r.pr + r.rc);
  long total = tp + fp + fn + tn;
  r.acc = total ? double(tp + tn) / double(total) : 0.0;
  return r;
}

BoundingBoxAnnotation box_at(double cx, double cy, double half = 2.0) {
  BoundingBoxAnnotation b;
  b.present = true;
  b.x_min = cx - half;
  b.x_max = cx + half;
  b.y_min = cy - half;
  b.y_max = cy + half;
  return b;
}

}  // namespace

TEST_CASE("worked example") {
  MetricSet m = compute_metrics({8, 2, 1, 5});
  CHECK(m.fdr == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.pr == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.rc == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(2.0 * 0.8 * (8.0 / 9.0) / (0.8 + 8.0 / 9.0)).epsilon(1e-12));
  CHECK(m.acc == doctest::Approx(0.8125).epsilon(1e-12));
}

TEST_CASE("perfect detector") {
  MetricSet m = compute_metrics({10, 0, 0, 3});
  CHECK(m.pr == 1.0);
  CHECK(m.rc == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.fdr == 0.0);
}

TEST_CASE("degenerate denominators") {
  MetricSet none = compute_metrics({0, 0, 0, 4});
  CHECK(none.pr == 1.0);
  CHECK(none.fdr == 0.0);
  CHECK(none.rc == 1.0);
  MetricSet misses = compute_metrics({0, 0, 5, 0});
  CHECK(misses.rc == 0.0);
  MetricSet zero_prrc = compute_metrics({0, 3, 5, 0});
  CHECK(zero_prrc.f1 == 0.0);
}

TEST_CASE("matches independent recomputation on random counts") {
  std::mt19937 rng(17);
  for (int i = 0; i < 1000; ++i) {
    long tp = long(rng() % 50), fp = long(rng() % 50), fn = long(rng() % 50),
         tn = long(rng() % 50);
    MetricSet m = compute_metrics({tp, fp, fn, tn});
    Ref r = reference_metrics(tp, fp, fn, tn);
    CHECK(m.fdr == r.fdr);
    CHECK(m.pr == r.pr);
    CHECK(m.rc == r.rc);
    CHECK(m.f1 == r.f1);
    CHECK(m.acc == r.acc);
  }
}

TEST_CASE("fdr complements precision") {
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    ConfusionCounts c{long(rng() % 20), long(rng() % 20), long(rng() % 20), long(rng() % 20)};
    if (c.tp + c.fp == 0) continue;
    MetricSet m = compute_metrics(c);
    CHECK(m.fdr + m.pr == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("metrics are scale free") {
  ConfusionCounts c{7, 3, 2, 11};
  MetricSet base = compute_metrics(c);
  for (long k : {2L, 5L, 13L}) {
    MetricSet m = compute_metrics({c.tp * k, c.fp * k, c.fn * k, c.tn * k});
    CHECK(m.fdr == doctest::Approx(base.fdr).epsilon(1e-12));
    CHECK(m.pr == doctest::Approx(base.pr).epsilon(1e-12));
    CHECK(m.rc == doctest::Approx(base.rc).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(base.f1).epsilon(1e-12));
    CHECK(m.acc == doctest::Approx(base.acc).epsilon(1e-12));
  }
}

TEST_CASE("shard counts merge by addition") {
  ConfusionCounts a{1, 2, 3, 4}, b{5, 6, 7, 8};
  a += b;
  CHECK(a.tp == 6);
  CHECK(a.fp == 8);
  CHECK(a.fn == 10);
  CHECK(a.tn == 12);
}

TEST_CASE("classify_frame cases") {
  BoundingBoxAnnotation absent;
  absent.present = false;

  // boundary: dist exactly gamma counts as TP
  CHECK(classify_frame({10, 10}, box_at(13, 14)) == FrameClass::TP);
  CHECK(classify_frame(BallCenter::none(), absent) == FrameClass::TN);
  // dist ~ 14.14 > 5: a detection exists, but it is wrong
  CHECK(classify_frame({10, 10}, box_at(20, 20)) == FrameClass::FP);
  CHECK(classify_frame(BallCenter::none(), box_at(20, 20)) == FrameClass::FN);
  CHECK(classify_frame({21, 20}, absent) == FrameClass::FP);
}

TEST_CASE("classify_frame is exhaustive") {
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) {
    BallCenter pred = (rng() % 2) ? BallCenter{double(rng() % 100), double(rng() % 100)}
                                  : BallCenter::none();
    BoundingBoxAnnotation truth =
        (rng() % 2) ? box_at(double(rng() % 100), double(rng() % 100)) : BoundingBoxAnnotation{};
    FrameClass cls = classify_frame(pred, truth);
    CHECK((cls == FrameClass::TP || cls == FrameClass::FP || cls == FrameClass::FN ||
           cls == FrameClass::TN));
    ConfusionCounts c;
    accumulate(c, cls);
    CHECK(c.total() == 1);
  }
}

TEST_CASE("latency harness reports medians") {
  auto work = [] { std::this_thread::sleep_for(std::chrono::microseconds(200)); };
  LatencyReport r = benchmark_latency({{"a", work}, {"b", work}}, 30, 3);
  REQUIRE(r.entries.size() == 2);
  for (const auto& e : r.entries) {
    CHECK(e.n_trials == 30);
    CHECK(e.median_ms > 0.0);
    CHECK(e.p95_ms >= e.median_ms);
  }
  CHECK(r.warmup_trials == 3);
  std::string csv = r.to_csv();
  CHECK(csv.find("a,") != std::string::npos);
  CHECK(csv.find("median_ms") != std::string::npos);
}

TEST_CASE("latency harness rejects too few trials") {
  CHECK_THROWS(benchmark_latency({{"a", [] {}}}, 10, 0));
}

TEST_CASE("repeated measurement is stable") {
  auto work = [] {
    volatile double s = 0;
    for (int i = 0; i < 200000; ++i) s += double(i);
  };
  LatencyReport r1 = benchmark_latency({{"m", work}}, 40, 5);
  LatencyReport r2 = benchmark_latency({{"m", work}}, 40, 5);
  double a = r1.entries[0].median_ms, b = r2.entries[0].median_ms;
  CHECK(std::abs(a - b) / std::max(a, b) < 0.2);
}
