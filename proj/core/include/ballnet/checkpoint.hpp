#pragma once

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <string>
#include <unordered_map>
#include <vector>

#include "ballnet/ffnet.hpp"
#include "ballnet/temporal.hpp"

namespace ballnet {

inline constexpr char kCheckpointMagic[8] = {'B', 'A', 'L', 'L', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json head_spec_to_json(const TemporalHeadSpec& spec);
TemporalHeadSpec head_spec_from_json(const nlohmann::json& j);

template <typename S>
const char* dtype_tag();
template <>
inline const char* dtype_tag<float>() { return "f32"; }
template <>
inline const char* dtype_tag<double>() { return "f64"; }

/// Self-describing container: magic, version, JSON directory, raw tensors.
template <typename S>
void save_checkpoint(const std::string& path, nlohmann::json meta,
                     const std::vector<std::pair<std::string, Tensor<S>*>>& tensors) {
  nlohmann::json dir = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    dir.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}});
    offset += uint64_t(t->size()) * sizeof(S);
  }
  meta["format_version"] = kCheckpointVersion;
  meta["dtype"] = dtype_tag<S>();
  meta["tensors"] = std::move(dir);
  std::string header = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  uint32_t version = kCheckpointVersion;
  uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), std::streamsize(header.size()));
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t->ptr()), std::streamsize(t->size() * sizeof(S)));
  if (!out) throw DataError("short write on checkpoint: " + path);
}

/// Reads the directory, fills every requested tensor by name (shape-checked),
/// and returns the metadata. Unknown versions are rejected.
template <typename S>
nlohmann::json load_checkpoint(const std::string& path,
                               const std::vector<std::pair<std::string, Tensor<S>*>>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  uint32_t version = 0;
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  std::string header(hlen, '\0');
  in.read(header.data(), std::streamsize(hlen));
  if (!in) throw DataError("truncated checkpoint header: " + path);
  nlohmann::json meta = nlohmann::json::parse(header);
  if (meta.value("dtype", "") != dtype_tag<S>())
    throw DataError("checkpoint dtype " + meta.value("dtype", "?") + " does not match runtime " +
                    dtype_tag<S>());

  const std::streampos data_start = in.tellg();
  std::unordered_map<std::string, nlohmann::json> dir;
  for (const auto& e : meta.at("tensors")) dir[e.at("name").get<std::string>()] = e;
  for (const auto& [name, t] : tensors) {
    auto it = dir.find(name);
    if (it == dir.end()) throw DataError("checkpoint " + path + " is missing tensor " + name);
    auto shape = it->second.at("shape").template get<std::vector<int64_t>>();
    if (shape != t->shape)
      throw DataError("checkpoint tensor " + name + " has shape " + shape_string(shape) +
                      ", expected " + shape_string(t->shape));
    in.seekg(data_start + std::streampos(it->second.at("offset").template get<uint64_t>()));
    in.read(reinterpret_cast<char*>(t->ptr()), std::streamsize(t->size() * sizeof(S)));
    if (!in) throw DataError("truncated checkpoint data: " + path);
  }
  return meta;
}

}  // namespace ballnet
