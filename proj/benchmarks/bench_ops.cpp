#include <benchmark/benchmark.h>

#include <random>

#include "ballnet/ffnet.hpp"
#include "ballnet/temporal.hpp"

using namespace ballnet;

static void BM_Conv2d3x3(benchmark::State& state) {
  const int64_t c = state.range(0);
  std::mt19937 rng(0);
  auto [w, b] = nn::conv_params<float>(9 * c, int(c), rng);
  Tensor<float> x({1, 60, 80, c});
  uniform_init(x, 0.5, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto in = make_var<float>(x, false);
    auto out = nn::conv2d(tape, in, w, b, 3);
    benchmark::DoNotOptimize(out->value.ptr());
  }
}
BENCHMARK(BM_Conv2d3x3)->Arg(16)->Arg(32)->Arg(64);

static void BM_DetectorForward(benchmark::State& state) {
  ModelSpec spec;
  spec.variant = Variant(state.range(0));
  spec.input_width = 320;
  spec.input_height = 240;
  SweatyNet<float> model(spec, 0);
  std::mt19937 rng(0);
  Tensor<float> x({1, spec.input_height, spec.input_width, 3});
  uniform_init(x, 0.5, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto in = make_var<float>(x, false);
    auto out = model.forward(tape, in, false);
    benchmark::DoNotOptimize(out.heatmap->value.ptr());
  }
}
BENCHMARK(BM_DetectorForward)->Arg(0)->Arg(1)->Arg(2);

static void BM_HeadForward(benchmark::State& state) {
  TemporalHeadSpec spec;
  spec.kind = HeadKind(state.range(0));
  TemporalHead<float> head(spec, 0);
  std::mt19937 rng(0);
  Tensor<float> frame({1, 30, 40, 1});
  uniform_init(frame, 0.2, rng);
  std::vector<VarPtr<float>> history(size_t(spec.history), make_var<float>(frame, false));
  for (auto _ : state) {
    Tape<float> tape;
    auto out = head.predict(tape, history);
    benchmark::DoNotOptimize(out[0]->value.ptr());
  }
}
BENCHMARK(BM_HeadForward)->Arg(0)->Arg(1)->Arg(2);

BENCHMARK_MAIN();
