#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ballnet/datamodel.hpp"
#include "ballnet/nn.hpp"

namespace ballnet {

enum class HeadKind { TCN, ConvLSTM, ConvGRU };

std::string head_name(HeadKind k);
HeadKind head_from_name(const std::string& name);

struct TemporalHeadSpec {
  HeadKind kind = HeadKind::TCN;
  int history = 20;
  int horizon = 1;
  int tcn_encoder_channels = 64;
  int tcn_decoder_channels = 96;
  int tcn_kernel = 3;
  std::vector<int> tcn_dilations = {1, 2, 4, 8};
  std::vector<int> rnn_channels = {32, 64, 32, 1};
  int rnn_kernel = 5;

  /// 1 + (k-1) * sum(dilations); must cover the history.
  int tcn_receptive_field() const {
    int s = 0;
    for (int d : tcn_dilations) s += d;
    return 1 + (tcn_kernel - 1) * s;
  }
  void validate() const;
};

/// Gated residual that injects early/late detector features into the
/// temporal input stream: out = sweaty + w * conv7x7(concat(tap2, tap6)),
/// taps bilinearly resampled to output resolution first. The 7x7 mix conv
/// starts at zero and w at 0.5, so an untrained gate is an exact pass-through.
template <typename S>
class FusionGate {
 public:
  FusionGate(int tap2_channels, int tap6_channels, uint32_t seed = 0) {
    std::mt19937 rng(seed);
    auto [mw, mb] = nn::conv_params<S>(int64_t(7) * 7 * (tap2_channels + tap6_channels), 1, rng,
                                       /*zero=*/true);
    mix_weight_ = mw;
    mix_bias_ = mb;
    w_ = make_var<S>(Tensor<S>({1}, S(0.5)), true);
  }

  VarPtr<S> fuse(Tape<S>& tape, const VarPtr<S>& sweaty_out, const VarPtr<S>& tap2,
                 const VarPtr<S>& tap6) {
    const int64_t oh = sweaty_out->value.dim(1), ow = sweaty_out->value.dim(2);
    auto t2 = nn::bilinear_resize(tape, tap2, oh, ow);
    auto t6 = nn::bilinear_resize(tape, tap6, oh, ow);
    auto mixed = nn::conv2d(tape, nn::concat_channels(tape, t2, t6), mix_weight_, mix_bias_, 7);
    return nn::add_scaled(tape, sweaty_out, w_, mixed);
  }

  VarPtr<S> weight() { return w_; }
  double weight_value() const { return double(w_->value[0]); }

  std::vector<VarPtr<S>> parameters() { return {w_, mix_weight_, mix_bias_}; }
  std::vector<std::pair<std::string, Tensor<S>*>> named_tensors() {
    return {{"fusion.w", &w_->value},
            {"fusion.mix.weight", &mix_weight_->value},
            {"fusion.mix.bias", &mix_bias_->value}};
  }

 private:
  VarPtr<S> w_, mix_weight_, mix_bias_;
};

/// Sequence head: consumes h fused heatmaps, emits p future heatmaps.
/// Hidden state never survives a call; repeated identical histories give
/// identical outputs.
template <typename S>
class TemporalHead {
 public:
  TemporalHead(const TemporalHeadSpec& spec, uint32_t seed);

  /// history: h tensors of shape (N,H,W,1). Returns p predictions, each
  /// (N,H,W,1) and non-negative.
  std::vector<VarPtr<S>> predict(Tape<S>& tape, const std::vector<VarPtr<S>>& history);

  const TemporalHeadSpec& spec() const { return spec_; }
  std::vector<VarPtr<S>> parameters();
  std::vector<std::pair<std::string, Tensor<S>*>> named_tensors();

 private:
  VarPtr<S> forward_once(Tape<S>& tape, const std::vector<VarPtr<S>>& frames);
  VarPtr<S> tcn_forward(Tape<S>& tape, const std::vector<VarPtr<S>>& frames);
  VarPtr<S> rnn_forward(Tape<S>& tape, const std::vector<VarPtr<S>>& frames);

  TemporalHeadSpec spec_;
  // TCN
  nn::ConvParams<S> tcn_encode2d_;
  std::vector<nn::ConvParams<S>> tcn_temporal_;
  nn::ConvParams<S> tcn_decode2d_;
  // ConvLSTM / ConvGRU, one entry per layer
  std::vector<nn::ConvParams<S>> rnn_gates_;  // LSTM: 4C gates; GRU: 2C gates
  std::vector<nn::ConvParams<S>> rnn_cand_;   // GRU only: candidate conv
};

/// Packs heatmaps into one (N,H,W,1) tensor.
template <typename S>
Tensor<S> heatmaps_to_tensor(const std::vector<const Heatmap*>& maps);

// ---------------------------------------------------------------------------
// Template implementations
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> heatmaps_to_tensor(const std::vector<const Heatmap*>& maps) {
  const int64_t n = int64_t(maps.size());
  const int64_t h = maps[0]->height, w = maps[0]->width;
  Tensor<S> t({n, h, w, 1});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < h * w; ++j) t[i * h * w + j] = S(maps[size_t(i)]->values[size_t(j)]);
  return t;
}

template <typename S>
TemporalHead<S>::TemporalHead(const TemporalHeadSpec& spec, uint32_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937 rng(seed);
  if (spec_.kind == HeadKind::TCN) {
    const int enc = spec_.tcn_encoder_channels, dec = spec_.tcn_decoder_channels;
    const int k = spec_.tcn_kernel;
    tcn_encode2d_ = nn::make_conv_params<S>(9, enc, rng);  // 3x3, 1 channel in
    const size_t nlayers = spec_.tcn_dilations.size();
    for (size_t i = 0; i < nlayers; ++i) {
      int cin = i == 0 ? enc : (i <= nlayers / 2 ? enc : dec);
      int cout = i + 1 <= nlayers / 2 ? enc : dec;
      tcn_temporal_.push_back(nn::make_conv_params<S>(int64_t(k) * cin, cout, rng));
    }
    tcn_decode2d_ = nn::make_conv_params<S>(dec, 1, rng);  // 1x1
  } else {
    int cin = 1;
    const int k = spec_.rnn_kernel;
    for (int c : spec_.rnn_channels) {
      int gates = spec_.kind == HeadKind::ConvLSTM ? 4 * c : 2 * c;
      auto g = nn::make_conv_params<S>(int64_t(k) * k * (cin + c), gates, rng);
      if (spec_.kind == HeadKind::ConvLSTM) {
        for (int i = c; i < 2 * c; ++i) g.bias->value[i] = S(1);  // forget gate
      }
      rnn_gates_.push_back(g);
      if (spec_.kind == HeadKind::ConvGRU)
        rnn_cand_.push_back(nn::make_conv_params<S>(int64_t(k) * k * (cin + c), c, rng));
      cin = c;
    }
  }
}

template <typename S>
std::vector<VarPtr<S>> TemporalHead<S>::predict(Tape<S>& tape,
                                                const std::vector<VarPtr<S>>& history) {
  if (int(history.size()) != spec_.history)
    throw DataError("predict: expected history of length " + std::to_string(spec_.history) +
                    ", got " + std::to_string(history.size()));
  std::vector<VarPtr<S>> frames = history;
  std::vector<VarPtr<S>> out;
  for (int s = 0; s < spec_.horizon; ++s) {
    std::vector<VarPtr<S>> window(frames.end() - spec_.history, frames.end());
    auto pred = forward_once(tape, window);
    out.push_back(pred);
    if (s + 1 < spec_.horizon) frames.push_back(pred);  // rollout on own output
  }
  return out;
}

template <typename S>
VarPtr<S> TemporalHead<S>::forward_once(Tape<S>& tape, const std::vector<VarPtr<S>>& frames) {
  return spec_.kind == HeadKind::TCN ? tcn_forward(tape, frames) : rnn_forward(tape, frames);
}

template <typename S>
VarPtr<S> TemporalHead<S>::tcn_forward(Tape<S>& tape, const std::vector<VarPtr<S>>& frames) {
  const int64_t n = frames[0]->value.dim(0), h = frames[0]->value.dim(1),
                w = frames[0]->value.dim(2);
  std::vector<VarPtr<S>> encoded;
  encoded.reserve(frames.size());
  for (const auto& f : frames)
    encoded.push_back(
        nn::relu(tape, nn::conv2d(tape, f, tcn_encode2d_.weight, tcn_encode2d_.bias, 3)));
  auto x = nn::stack_time(tape, encoded);  // (T, N*H*W, enc)
  for (size_t i = 0; i < tcn_temporal_.size(); ++i) {
    x = nn::conv1d_causal(tape, x, tcn_temporal_[i].weight, tcn_temporal_[i].bias,
                          spec_.tcn_kernel, spec_.tcn_dilations[i]);
    x = nn::normalized_relu(tape, x);
  }
  auto last = nn::take_time(tape, x, x->value.dim(0) - 1);
  auto img = nn::reshape(tape, last, {n, h, w, int64_t(spec_.tcn_decoder_channels)});
  return nn::relu(tape, nn::conv2d(tape, img, tcn_decode2d_.weight, tcn_decode2d_.bias, 1));
}

template <typename S>
VarPtr<S> TemporalHead<S>::rnn_forward(Tape<S>& tape, const std::vector<VarPtr<S>>& frames) {
  const auto shape = frames[0]->value.shape;  // (N,H,W,1)
  const size_t nl = spec_.rnn_channels.size();
  std::vector<VarPtr<S>> hidden(nl), cell(nl);
  for (size_t l = 0; l < nl; ++l) {
    auto hs = shape;
    hs[3] = spec_.rnn_channels[l];
    hidden[l] = make_var<S>(Tensor<S>(hs), false);
    if (spec_.kind == HeadKind::ConvLSTM) cell[l] = make_var<S>(Tensor<S>(hs), false);
  }
  const int k = spec_.rnn_kernel;
  VarPtr<S> top;
  for (const auto& frame : frames) {
    VarPtr<S> x = frame;
    for (size_t l = 0; l < nl; ++l) {
      const int64_t c = spec_.rnn_channels[l];
      auto xh = nn::concat_channels(tape, x, hidden[l]);
      if (spec_.kind == HeadKind::ConvLSTM) {
        auto gates = nn::conv2d(tape, xh, rnn_gates_[l].weight, rnn_gates_[l].bias, k);
        auto ig = nn::sigmoid(tape, nn::slice_channels(tape, gates, 0, c));
        auto fg = nn::sigmoid(tape, nn::slice_channels(tape, gates, c, 2 * c));
        auto gg = nn::tanh_act(tape, nn::slice_channels(tape, gates, 2 * c, 3 * c));
        auto og = nn::sigmoid(tape, nn::slice_channels(tape, gates, 3 * c, 4 * c));
        cell[l] = nn::add(tape, nn::mul(tape, fg, cell[l]), nn::mul(tape, ig, gg));
        hidden[l] = nn::mul(tape, og, nn::tanh_act(tape, cell[l]));
      } else {
        auto zr = nn::conv2d(tape, xh, rnn_gates_[l].weight, rnn_gates_[l].bias, k);
        auto z = nn::sigmoid(tape, nn::slice_channels(tape, zr, 0, c));
        auto r = nn::sigmoid(tape, nn::slice_channels(tape, zr, c, 2 * c));
        auto xrh = nn::concat_channels(tape, x, nn::mul(tape, r, hidden[l]));
        auto cand =
            nn::tanh_act(tape, nn::conv2d(tape, xrh, rnn_cand_[l].weight, rnn_cand_[l].bias, k));
        // h <- h + z*(cand - h)
        hidden[l] = nn::add(tape, hidden[l],
                            nn::mul(tape, z, nn::sub(tape, cand, hidden[l])));
      }
      x = hidden[l];
    }
    top = x;
  }
  return nn::relu(tape, top);
}

template <typename S>
std::vector<VarPtr<S>> TemporalHead<S>::parameters() {
  std::vector<VarPtr<S>> out;
  auto push = [&out](nn::ConvParams<S>& c) {
    if (c.weight) {
      out.push_back(c.weight);
      out.push_back(c.bias);
    }
  };
  push(tcn_encode2d_);
  for (auto& c : tcn_temporal_) push(c);
  push(tcn_decode2d_);
  for (auto& c : rnn_gates_) push(c);
  for (auto& c : rnn_cand_) push(c);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>*>> TemporalHead<S>::named_tensors() {
  std::vector<std::pair<std::string, Tensor<S>*>> out;
  auto push = [&out](const std::string& name, nn::ConvParams<S>& c) {
    if (c.weight) {
      out.emplace_back(name + ".weight", &c.weight->value);
      out.emplace_back(name + ".bias", &c.bias->value);
    }
  };
  std::string prefix = "head." + head_name(spec_.kind);
  push(prefix + ".encode2d", tcn_encode2d_);
  for (size_t i = 0; i < tcn_temporal_.size(); ++i)
    push(prefix + ".temporal" + std::to_string(i), tcn_temporal_[i]);
  push(prefix + ".decode2d", tcn_decode2d_);
  for (size_t i = 0; i < rnn_gates_.size(); ++i)
    push(prefix + ".gates" + std::to_string(i), rnn_gates_[i]);
  for (size_t i = 0; i < rnn_cand_.size(); ++i)
    push(prefix + ".cand" + std::to_string(i), rnn_cand_[i]);
  return out;
}

}  // namespace ballnet
