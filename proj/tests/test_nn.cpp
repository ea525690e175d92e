#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ballnet/adam.hpp"
#include "ballnet/nn.hpp"

using namespace ballnet;

namespace {

using D = double;

// Central finite differences against the tape gradient. The forward closure
// must rebuild the graph from scratch so parameter perturbations take effect.
void check_gradients(const std::vector<VarPtr<D>>& params,
                     const std::function<VarPtr<D>(Tape<D>&)>& forward, double step = 1e-5,
                     double tol = 1e-6) {
  Tape<D> tape;
  auto loss = forward(tape);
  for (auto& p : params) p->ensure_grad().fill(0);
  tape.backward(loss);

  for (auto& p : params) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + step;
      Tape<D> t1;
      double up = forward(t1)->value[0];
      p->value[i] = saved - step;
      Tape<D> t2;
      double down = forward(t2)->value[0];
      p->value[i] = saved;
      double fd = (up - down) / (2.0 * step);
      double got = p->grad[i];
      double denom = std::max({1.0, std::abs(fd), std::abs(got)});
      CHECK(std::abs(fd - got) / denom < tol);
    }
  }
}

Tensor<D> random_tensor(std::vector<int64_t> shape, std::mt19937& rng, double limit = 1.0) {
  Tensor<D> t(std::move(shape));
  uniform_init(t, limit, rng);
  return t;
}

}  // namespace

TEST_CASE("conv2d 3x3 shapes and gradients") {
  std::mt19937 rng(1);
  auto [w, b] = nn::conv_params<D>(9 * 2, 3, rng);
  auto x = make_var<D>(random_tensor({2, 5, 6, 2}, rng), true);
  {
    Tape<D> tape;
    auto y = nn::conv2d(tape, x, w, b, 3);
    REQUIRE(y->value.shape == std::vector<int64_t>({2, 5, 6, 3}));
  }
  check_gradients({x, w, b}, [&](Tape<D>& tape) {
    auto y = nn::conv2d(tape, x, w, b, 3);
    return nn::mse_loss(tape, y, Tensor<D>({2, 5, 6, 3}, 0.3));
  });
}

TEST_CASE("conv2d 1x1 gradients") {
  std::mt19937 rng(2);
  auto [w, b] = nn::conv_params<D>(4, 2, rng);
  auto x = make_var<D>(random_tensor({1, 3, 4, 4}, rng), true);
  check_gradients({x, w, b}, [&](Tape<D>& tape) {
    auto y = nn::conv2d(tape, x, w, b, 1);
    return nn::mse_loss(tape, y, Tensor<D>({1, 3, 4, 2}, -0.1));
  });
}

TEST_CASE("conv2d same padding matches a direct stencil") {
  std::mt19937 rng(3);
  auto [w, b] = nn::conv_params<D>(9, 1, rng);
  auto x = make_var<D>(random_tensor({1, 4, 5, 1}, rng), false);
  Tape<D> tape;
  auto y = nn::conv2d(tape, x, w, b, 3);
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 5; ++ox) {
      double acc = b->value[0];
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          int iy = oy + ky - 1, ix = ox + kx - 1;
          if (iy < 0 || ix < 0 || iy >= 4 || ix >= 5) continue;
          acc += x->value[iy * 5 + ix] * w->value[ky * 3 + kx];
        }
      CHECK(y->value[oy * 5 + ox] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("causal conv1d never looks ahead") {
  std::mt19937 rng(4);
  auto [w, b] = nn::conv_params<D>(3 * 2, 2, rng);
  Tensor<D> base = random_tensor({6, 3, 2}, rng);
  auto run = [&](const Tensor<D>& in) {
    Tape<D> tape;
    auto x = make_var<D>(in, false);
    return nn::conv1d_causal(tape, x, w, b, 3, 2)->value;
  };
  Tensor<D> out = run(base);
  for (int64_t t = 0; t < 6; ++t) {
    Tensor<D> perturbed = base;
    for (int64_t j = 0; j < 3 * 2; ++j) perturbed[t * 6 + j] += 10.0;
    Tensor<D> out2 = run(perturbed);
    for (int64_t u = 0; u < t; ++u)
      for (int64_t j = 0; j < 3 * 2; ++j) CHECK(out2[u * 6 + j] == out[u * 6 + j]);
  }
}

TEST_CASE("causal conv1d gradients with dilation") {
  std::mt19937 rng(5);
  auto [w, b] = nn::conv_params<D>(3 * 2, 3, rng);
  auto x = make_var<D>(random_tensor({5, 2, 2}, rng), true);
  check_gradients({x, w, b}, [&](Tape<D>& tape) {
    auto y = nn::conv1d_causal(tape, x, w, b, 3, 2);
    return nn::mse_loss(tape, y, Tensor<D>({5, 2, 3}, 0.2));
  });
}

TEST_CASE("pointwise op gradients") {
  std::mt19937 rng(6);
  auto x = make_var<D>(random_tensor({1, 2, 3, 2}, rng, 0.8), true);
  auto z = make_var<D>(random_tensor({1, 2, 3, 2}, rng, 0.8), true);
  auto w = make_var<D>(Tensor<D>({1}, 0.4), true);
  check_gradients({x}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::sigmoid(tape, x), Tensor<D>({1, 2, 3, 2}, 0.5));
  });
  check_gradients({x}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::tanh_act(tape, x), Tensor<D>({1, 2, 3, 2}, 0.5));
  });
  check_gradients({x, z}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::mul(tape, x, z), Tensor<D>({1, 2, 3, 2}, 0.1));
  });
  check_gradients({x, z}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::sub(tape, x, z), Tensor<D>({1, 2, 3, 2}, 0.1));
  });
  check_gradients({x, z, w}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::add_scaled(tape, x, w, z), Tensor<D>({1, 2, 3, 2}, 0.1));
  });
}

TEST_CASE("relu gradients away from the kink") {
  std::mt19937 rng(7);
  Tensor<D> init = random_tensor({1, 2, 3, 2}, rng);
  for (int64_t i = 0; i < init.size(); ++i)
    if (std::abs(init[i]) < 0.05) init[i] = 0.5;  // keep FD off the kink
  auto x = make_var<D>(init, true);
  check_gradients({x}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::relu(tape, x), Tensor<D>({1, 2, 3, 2}, 0.2));
  });
}

TEST_CASE("concat and slice gradients") {
  std::mt19937 rng(8);
  auto a = make_var<D>(random_tensor({1, 2, 2, 2}, rng), true);
  auto b = make_var<D>(random_tensor({1, 2, 2, 3}, rng), true);
  check_gradients({a, b}, [&](Tape<D>& tape) {
    auto c = nn::concat_channels(tape, a, b);
    auto s = nn::slice_channels(tape, c, 1, 4);
    return nn::mse_loss(tape, s, Tensor<D>({1, 2, 2, 3}, 0.0));
  });
}

TEST_CASE("maxpool halves and backpropagates to the argmax") {
  std::mt19937 rng(9);
  auto x = make_var<D>(random_tensor({1, 4, 6, 2}, rng), true);
  {
    Tape<D> tape;
    auto y = nn::maxpool2x2(tape, x);
    REQUIRE(y->value.shape == std::vector<int64_t>({1, 2, 3, 2}));
  }
  check_gradients({x}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::maxpool2x2(tape, x), Tensor<D>({1, 2, 3, 2}, 0.1));
  });
}

TEST_CASE("bilinear resize keeps constants and backpropagates") {
  std::mt19937 rng(10);
  auto c = make_var<D>(Tensor<D>({1, 3, 4, 2}, 0.7), false);
  {
    Tape<D> tape;
    auto up = nn::bilinear_resize(tape, c, 6, 8);
    for (int64_t i = 0; i < up->value.size(); ++i)
      CHECK(up->value[i] == doctest::Approx(0.7).epsilon(1e-12));
    auto same = nn::bilinear_resize(tape, c, 3, 4);
    for (int64_t i = 0; i < same->value.size(); ++i)
      CHECK(same->value[i] == doctest::Approx(c->value[i]).epsilon(1e-12));
  }
  auto x = make_var<D>(random_tensor({1, 3, 4, 2}, rng), true);
  check_gradients({x}, [&](Tape<D>& tape) {
    return nn::mse_loss(tape, nn::bilinear_resize(tape, x, 6, 8), Tensor<D>({1, 6, 8, 2}, 0.0));
  });
  check_gradients({x}, [&](Tape<D>& tape) {  // downsampling path
    return nn::mse_loss(tape, nn::bilinear_resize(tape, x, 2, 2), Tensor<D>({1, 2, 2, 2}, 0.0));
  });
}

TEST_CASE("batchnorm training gradients and running stats") {
  std::mt19937 rng(11);
  nn::BatchNorm<D> bn(3);
  auto x = make_var<D>(random_tensor({2, 2, 2, 3}, rng), true);
  check_gradients({x, bn.gamma, bn.beta}, [&](Tape<D>& tape) {
    nn::BatchNorm<D> local(3);
    local.gamma = bn.gamma;
    local.beta = bn.beta;
    return nn::mse_loss(tape, nn::batchnorm(tape, x, local, true), Tensor<D>({2, 2, 2, 3}, 0.1));
  });

  Tensor<D> mean_before = bn.running_mean;
  {
    Tape<D> tape;
    nn::batchnorm(tape, x, bn, true);
  }
  CHECK(bn.running_mean.data != mean_before.data);

  Tensor<D> mean_frozen = bn.running_mean;
  {
    Tape<D> tape;
    nn::batchnorm(tape, x, bn, false);
  }
  CHECK(bn.running_mean.data == mean_frozen.data);
}

TEST_CASE("normalized relu scales each channel to unit peak") {
  std::mt19937 rng(12);
  Tensor<D> init = random_tensor({4, 3, 2}, rng, 2.0);
  auto x = make_var<D>(init, true);
  Tape<D> tape;
  auto y = nn::normalized_relu(tape, x);
  for (int64_t i = 0; i < y->value.size(); ++i) {
    CHECK(y->value[i] >= 0.0);
    CHECK(y->value[i] <= 1.0);
  }
  check_gradients({x}, [&](Tape<D>& t) {
    return nn::mse_loss(t, nn::normalized_relu(t, x), Tensor<D>({4, 3, 2}, 0.3));
  }, 1e-6, 1e-4);
}

TEST_CASE("dropout is identity in eval mode and rescales in train mode") {
  std::mt19937 rng(13);
  auto x = make_var<D>(Tensor<D>({2, 3, 3, 4}, 1.0), false);
  Tape<D> tape;
  auto eval = nn::dropout_spatial(tape, x, 0.5, rng, false);
  CHECK(eval->value.data == x->value.data);
  auto train = nn::dropout_spatial(tape, x, 0.5, rng, true);
  for (int64_t i = 0; i < train->value.size(); ++i)
    CHECK((train->value[i] == 0.0 || train->value[i] == doctest::Approx(2.0)));
  // whole (sample, channel) planes drop together
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 4; ++c) {
      double first = train->value[n * 36 + c];
      for (int64_t p = 0; p < 9; ++p) CHECK(train->value[n * 36 + p * 4 + c] == first);
    }
}

TEST_CASE("stack and take over the time axis") {
  std::mt19937 rng(14);
  auto f0 = make_var<D>(random_tensor({2, 2, 2, 3}, rng), true);
  auto f1 = make_var<D>(random_tensor({2, 2, 2, 3}, rng), true);
  {
    Tape<D> tape;
    auto st = nn::stack_time(tape, {f0, f1});
    REQUIRE(st->value.shape == std::vector<int64_t>({2, 8, 3}));
    auto last = nn::take_time(tape, st, 1);
    for (int64_t i = 0; i < last->value.size(); ++i) CHECK(last->value[i] == f1->value[i]);
  }
  check_gradients({f0, f1}, [&](Tape<D>& tape) {
    auto st = nn::stack_time(tape, {f0, f1});
    return nn::mse_loss(tape, nn::take_time(tape, st, 0), Tensor<D>({8, 3}, 0.2));
  });
}

TEST_CASE("adam performs the textbook first step") {
  auto p = make_var<D>(Tensor<D>({1}, 1.0), true);
  Adam<D> opt({p}, 0.1);
  p->ensure_grad()[0] = 0.5;
  opt.step();
  // bias-corrected first step moves by ~lr against the gradient sign
  double m = 0.1 * 0.5, v = 0.001 * 0.25;
  double mh = m / (1 - 0.9), vh = v / (1 - 0.999);
  double expected = 1.0 - 0.1 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(p->value[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("zero gradient leaves adam parameters unchanged") {
  auto p = make_var<D>(Tensor<D>({3}, 0.7), true);
  Adam<D> opt({p}, 0.1);
  opt.zero_grad();
  opt.step();
  for (int64_t i = 0; i < 3; ++i) CHECK(p->value[i] == 0.7);
}
