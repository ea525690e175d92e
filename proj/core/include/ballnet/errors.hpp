#pragma once

#include <stdexcept>
#include <string>

namespace ballnet {

/// Problems with input files, annotations, or checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values encountered during optimization.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ballnet
