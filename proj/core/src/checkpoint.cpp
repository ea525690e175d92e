#include "ballnet/checkpoint.hpp"

namespace ballnet {

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  return {{"variant", variant_name(spec.variant)},
          {"base_channels", spec.base_channels},
          {"dropout_p", spec.dropout_p},
          {"input_height", spec.input_height},
          {"input_width", spec.input_width}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.variant = variant_from_name(j.at("variant").get<std::string>());
  spec.base_channels = j.at("base_channels").get<int>();
  spec.dropout_p = j.at("dropout_p").get<double>();
  spec.input_height = j.at("input_height").get<int>();
  spec.input_width = j.at("input_width").get<int>();
  spec.validate();
  return spec;
}

nlohmann::json head_spec_to_json(const TemporalHeadSpec& spec) {
  return {{"kind", head_name(spec.kind)},
          {"history", spec.history},
          {"horizon", spec.horizon},
          {"tcn_encoder_channels", spec.tcn_encoder_channels},
          {"tcn_decoder_channels", spec.tcn_decoder_channels},
          {"tcn_kernel", spec.tcn_kernel},
          {"tcn_dilations", spec.tcn_dilations},
          {"rnn_channels", spec.rnn_channels},
          {"rnn_kernel", spec.rnn_kernel}};
}

TemporalHeadSpec head_spec_from_json(const nlohmann::json& j) {
  TemporalHeadSpec spec;
  spec.kind = head_from_name(j.at("kind").get<std::string>());
  spec.history = j.at("history").get<int>();
  spec.horizon = j.at("horizon").get<int>();
  spec.tcn_encoder_channels = j.at("tcn_encoder_channels").get<int>();
  spec.tcn_decoder_channels = j.at("tcn_decoder_channels").get<int>();
  spec.tcn_kernel = j.at("tcn_kernel").get<int>();
  spec.tcn_dilations = j.at("tcn_dilations").get<std::vector<int>>();
  spec.rnn_channels = j.at("rnn_channels").get<std::vector<int>>();
  spec.rnn_kernel = j.at("rnn_kernel").get<int>();
  spec.validate();
  return spec;
}

}  // namespace ballnet
