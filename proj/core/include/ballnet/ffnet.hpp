#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ballnet/datamodel.hpp"
#include "ballnet/nn.hpp"

namespace ballnet {

enum class Variant { SweatyNet1, SweatyNet2, SweatyNet3 };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Declarative description of a detector variant; all shapes and parameter
/// counts are computable from the descriptor list alone.
struct ModelSpec {
  Variant variant = Variant::SweatyNet1;
  int base_channels = 8;
  double dropout_p = 0.0;
  int input_height = 480;
  int input_width = 640;

  int output_height() const { return input_height / kDownsampleFactor; }
  int output_width() const { return input_width / kDownsampleFactor; }
  void validate() const;
};

enum class LayerKind { Conv, BatchNorm, Relu, MaxPool, BilinearUpsample, Dropout, ConcatSkip };

struct LayerDescriptor {
  LayerKind kind;
  int kernel = 0;
  int in_channels = 0;
  int out_channels = 0;
  int block = 0;      // 1..5 encoder, 6..7 decoder, 0 head/global
  int skip_from = 0;  // for ConcatSkip: encoder block whose output is appended
};

/// The canonical per-variant layer table. Encoder block 1 has one layer;
/// encoder blocks 2-5 and both decoder blocks have three layers each
/// (SweatyNet-2 drops the first layer of encoder blocks 2-5; SweatyNet-3
/// shrinks the first layer of encoder blocks 2-5 and both decoder blocks
/// to 1x1). Four max-pools follow encoder blocks 1-4; bilinear x2 upsampling
/// follows encoder block 5 and decoder block 6; skips concatenate the
/// encoder outputs whose resolution matches the upsampled features.
std::vector<LayerDescriptor> describe_model(const ModelSpec& spec);

/// Independent parameter count from a descriptor list:
/// k*k*Cin*Cout + Cout per conv, 2*C per batchnorm.
int64_t descriptor_param_count(const std::vector<LayerDescriptor>& layers);

template <typename S>
struct ConvLayer {
  VarPtr<S> weight, bias;
  int kernel = 3;
};

/// Block-2 and block-6 activations, exposed for the temporal fusion.
template <typename S>
struct FeatureTaps {
  VarPtr<S> block2;  // (N, H/2, W/2, 2*base)
  VarPtr<S> block6;  // (N, H/8, W/8, 8*base)
};

template <typename S>
class SweatyNet {
 public:
  SweatyNet(const ModelSpec& spec, uint32_t seed);

  struct Output {
    VarPtr<S> heatmap;  // (N, H/4, W/4, 1), non-negative
    FeatureTaps<S> taps;
  };

  /// input: (N, H, W, 3). Dropout is active only when training and the spec
  /// asks for it; batchnorm uses running statistics when not training.
  Output forward(Tape<S>& tape, const VarPtr<S>& input, bool training,
                 std::mt19937* rng = nullptr);

  std::vector<VarPtr<S>> parameters();
  int64_t param_count();
  const ModelSpec& spec() const { return spec_; }
  const std::vector<LayerDescriptor>& descriptors() const { return descriptors_; }
  int tap2_channels() const { return 2 * spec_.base_channels; }
  int tap6_channels() const { return 8 * spec_.base_channels; }

  /// All persistent state for checkpointing: parameters plus batchnorm
  /// running statistics, in descriptor order.
  std::vector<std::pair<std::string, Tensor<S>*>> named_tensors();

 private:
  ModelSpec spec_;
  std::vector<LayerDescriptor> descriptors_;
  std::vector<ConvLayer<S>> convs_;            // one per Conv descriptor
  std::vector<nn::BatchNorm<S>> norms_;        // one per BatchNorm descriptor
};

/// Packs frames into an (N,H,W,3) input tensor; all frames must share the
/// spec input shape.
template <typename S>
Tensor<S> frames_to_tensor(const std::vector<const ImageFrame*>& frames, const ModelSpec& spec);

/// Converts one sample of the (N,H,W,1) network output back to a Heatmap.
template <typename S>
Heatmap tensor_to_heatmap(const Tensor<S>& t, int64_t sample);

// ---------------------------------------------------------------------------
// Template implementations
// ---------------------------------------------------------------------------

template <typename S>
SweatyNet<S>::SweatyNet(const ModelSpec& spec, uint32_t seed)
    : spec_(spec), descriptors_(describe_model(spec)) {
  spec_.validate();
  std::mt19937 rng(seed);
  for (const auto& d : descriptors_) {
    if (d.kind == LayerKind::Conv) {
      auto [w, b] = nn::conv_params<S>(int64_t(d.kernel) * d.kernel * d.in_channels,
                                       d.out_channels, rng);
      convs_.push_back({w, b, d.kernel});
    } else if (d.kind == LayerKind::BatchNorm) {
      norms_.emplace_back(d.out_channels);
    }
  }
}

template <typename S>
typename SweatyNet<S>::Output SweatyNet<S>::forward(Tape<S>& tape, const VarPtr<S>& input,
                                                    bool training, std::mt19937* rng) {
  const auto& sh = input->value.shape;
  if (sh.size() != 4 || sh[1] != spec_.input_height || sh[2] != spec_.input_width || sh[3] != 3)
    throw DataError("forward: expected (N," + std::to_string(spec_.input_height) + "," +
                    std::to_string(spec_.input_width) + ",3), got " + shape_string(sh));
  std::mt19937 fallback_rng(0);
  if (!rng) rng = &fallback_rng;

  VarPtr<S> cur = input;
  std::vector<VarPtr<S>> block_out(8);  // block id -> last activation
  size_t conv_i = 0, norm_i = 0;
  for (const auto& d : descriptors_) {
    switch (d.kind) {
      case LayerKind::Conv: {
        auto& l = convs_[conv_i++];
        cur = nn::conv2d(tape, cur, l.weight, l.bias, l.kernel);
        break;
      }
      case LayerKind::BatchNorm:
        cur = nn::batchnorm(tape, cur, norms_[norm_i++], training);
        break;
      case LayerKind::Relu:
        cur = nn::relu(tape, cur);
        break;
      case LayerKind::MaxPool:
        cur = nn::maxpool2x2(tape, cur);
        break;
      case LayerKind::BilinearUpsample:
        cur = nn::bilinear_resize(tape, cur, cur->value.dim(1) * 2, cur->value.dim(2) * 2);
        break;
      case LayerKind::Dropout:
        cur = nn::dropout_spatial(tape, cur, spec_.dropout_p, *rng, training);
        break;
      case LayerKind::ConcatSkip:
        cur = nn::concat_channels(tape, cur, block_out.at(size_t(d.skip_from)));
        break;
    }
    if (d.block > 0) block_out.at(size_t(d.block)) = cur;
  }
  return {cur, {block_out.at(2), block_out.at(6)}};
}

template <typename S>
std::vector<VarPtr<S>> SweatyNet<S>::parameters() {
  std::vector<VarPtr<S>> out;
  for (auto& c : convs_) {
    out.push_back(c.weight);
    out.push_back(c.bias);
  }
  for (auto& n : norms_) {
    out.push_back(n.gamma);
    out.push_back(n.beta);
  }
  return out;
}

template <typename S>
int64_t SweatyNet<S>::param_count() {
  int64_t n = 0;
  for (auto& p : parameters()) n += p->value.size();
  return n;
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>*>> SweatyNet<S>::named_tensors() {
  std::vector<std::pair<std::string, Tensor<S>*>> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    out.emplace_back("conv" + std::to_string(i) + ".weight", &convs_[i].weight->value);
    out.emplace_back("conv" + std::to_string(i) + ".bias", &convs_[i].bias->value);
  }
  for (size_t i = 0; i < norms_.size(); ++i) {
    std::string p = "bn" + std::to_string(i);
    out.emplace_back(p + ".gamma", &norms_[i].gamma->value);
    out.emplace_back(p + ".beta", &norms_[i].beta->value);
    out.emplace_back(p + ".running_mean", &norms_[i].running_mean);
    out.emplace_back(p + ".running_var", &norms_[i].running_var);
  }
  return out;
}

template <typename S>
Tensor<S> frames_to_tensor(const std::vector<const ImageFrame*>& frames, const ModelSpec& spec) {
  const int64_t n = int64_t(frames.size());
  Tensor<S> t({n, spec.input_height, spec.input_width, 3});
  for (int64_t i = 0; i < n; ++i) {
    const ImageFrame& f = *frames[size_t(i)];
    if (f.height != spec.input_height || f.width != spec.input_width)
      throw DataError("frame '" + f.source_id + "' is " + std::to_string(f.width) + "x" +
                      std::to_string(f.height) + ", expected " + std::to_string(spec.input_width) +
                      "x" + std::to_string(spec.input_height));
    for (size_t j = 0; j < f.pixels.size(); ++j)
      t[i * int64_t(f.pixels.size()) + int64_t(j)] = S(f.pixels[j]);
  }
  return t;
}

template <typename S>
Heatmap tensor_to_heatmap(const Tensor<S>& t, int64_t sample) {
  const int64_t h = t.dim(1), w = t.dim(2);
  Heatmap hm{int(w), int(h)};
  const S* p = t.ptr() + sample * h * w * t.dim(3);
  for (int64_t i = 0; i < h * w; ++i) hm.values[size_t(i)] = double(p[i * t.dim(3)]);
  return hm;
}

}  // namespace ballnet
