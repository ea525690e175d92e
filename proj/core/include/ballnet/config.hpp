#pragma once

#include <map>
#include <optional>
#include <string>

#include "ballnet/errors.hpp"

namespace ballnet {

/// Flat key-value configuration: one `dotted.key = value` per line, '#'
/// comments. CLI --set overrides land on top of the file contents.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Parses "key=value" and applies it.
  void set_kv(const std::string& kv);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Stable digest of the full key-value map, for the artifact manifest.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ballnet
