#include "ballnet/temporal.hpp"

namespace ballnet {

std::string head_name(HeadKind k) {
  switch (k) {
    case HeadKind::TCN: return "tcn";
    case HeadKind::ConvLSTM: return "convlstm";
    case HeadKind::ConvGRU: return "convgru";
  }
  return "?";
}

HeadKind head_from_name(const std::string& name) {
  if (name == "tcn") return HeadKind::TCN;
  if (name == "convlstm") return HeadKind::ConvLSTM;
  if (name == "convgru") return HeadKind::ConvGRU;
  throw DataError("unknown temporal head: " + name);
}

void TemporalHeadSpec::validate() const {
  if (history < 1 || horizon < 1) throw DataError("history and horizon must be >= 1");
  if (rnn_channels.size() != 4 || rnn_channels != std::vector<int>{32, 64, 32, 1})
    throw DataError("recurrent stack must be 4 layers of 32,64,32,1 channels");
  if (kind == HeadKind::TCN && tcn_receptive_field() < history)
    throw DataError("TCN receptive field " + std::to_string(tcn_receptive_field()) +
                    " does not cover history " + std::to_string(history));
}

}  // namespace ballnet
