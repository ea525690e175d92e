#include "ballnet/ffnet.hpp"

namespace ballnet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::SweatyNet1: return "sweaty1";
    case Variant::SweatyNet2: return "sweaty2";
    case Variant::SweatyNet3: return "sweaty3";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "sweaty1") return Variant::SweatyNet1;
  if (name == "sweaty2") return Variant::SweatyNet2;
  if (name == "sweaty3") return Variant::SweatyNet3;
  throw DataError("unknown model variant: " + name);
}

void ModelSpec::validate() const {
  if (base_channels < 1) throw DataError("base_channels must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw DataError("dropout_p must be in [0,1)");
  if (input_height % 16 || input_width % 16)
    throw DataError("input shape must be divisible by 16 (four pooling stages)");
}

namespace {

void add_conv_bn_relu(std::vector<LayerDescriptor>& out, int k, int cin, int cout, int block) {
  out.push_back({LayerKind::Conv, k, cin, cout, block});
  out.push_back({LayerKind::BatchNorm, 0, cout, cout, block});
  out.push_back({LayerKind::Relu, 0, cout, cout, block});
}

}  // namespace

std::vector<LayerDescriptor> describe_model(const ModelSpec& spec) {
  spec.validate();
  const int b = spec.base_channels;
  const bool sn2 = spec.variant == Variant::SweatyNet2;
  const bool sn3 = spec.variant == Variant::SweatyNet3;
  std::vector<LayerDescriptor> out;

  // Encoder block 1: single layer, then pool.
  add_conv_bn_relu(out, 3, 3, b, 1);
  out.push_back({LayerKind::MaxPool});

  // Encoder blocks 2-5: channel doubling in the first layer.
  int cin = b;
  for (int block = 2; block <= 5; ++block) {
    int cout = cin * 2;
    if (!sn2) add_conv_bn_relu(out, sn3 ? 1 : 3, cin, cout, block);
    add_conv_bn_relu(out, 3, sn2 ? cin : cout, cout, block);
    add_conv_bn_relu(out, 3, cout, cout, block);
    if (spec.dropout_p > 0.0)
      out.push_back({LayerKind::Dropout, 0, cout, cout, block});
    if (block < 5) out.push_back({LayerKind::MaxPool});
    cin = cout;
  }

  // Decoder: upsample, append the matching-resolution encoder output,
  // three layers with the channel count halved before the next upsample.
  out.push_back({LayerKind::BilinearUpsample});
  out.push_back({LayerKind::ConcatSkip, 0, 16 * b, 16 * b + 8 * b, 0, 4});
  add_conv_bn_relu(out, sn3 ? 1 : 3, 24 * b, 16 * b, 6);
  add_conv_bn_relu(out, 3, 16 * b, 16 * b, 6);
  add_conv_bn_relu(out, 3, 16 * b, 8 * b, 6);

  out.push_back({LayerKind::BilinearUpsample});
  out.push_back({LayerKind::ConcatSkip, 0, 8 * b, 8 * b + 4 * b, 0, 3});
  add_conv_bn_relu(out, sn3 ? 1 : 3, 12 * b, 8 * b, 7);
  add_conv_bn_relu(out, 3, 8 * b, 8 * b, 7);
  add_conv_bn_relu(out, 3, 8 * b, 4 * b, 7);

  // 1x1 output head with ReLU keeps the map non-negative.
  out.push_back({LayerKind::Conv, 1, 4 * b, 1, 0});
  out.push_back({LayerKind::Relu, 0, 1, 1, 0});
  return out;
}

int64_t descriptor_param_count(const std::vector<LayerDescriptor>& layers) {
  int64_t n = 0;
  for (const auto& d : layers) {
    if (d.kind == LayerKind::Conv)
      n += int64_t(d.kernel) * d.kernel * d.in_channels * d.out_channels + d.out_channels;
    else if (d.kind == LayerKind::BatchNorm)
      n += 2 * int64_t(d.out_channels);
  }
  return n;
}

}  // namespace ballnet
