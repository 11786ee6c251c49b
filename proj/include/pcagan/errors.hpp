#pragma once

#include <stdexcept>
#include <string>

namespace pcagan {

/// Bad caller input: wrong dimensions, out-of-range settings, malformed config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values or hit a singular system.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base of on-disk dataset/checkpoint errors; each failure mode has its own type.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class HashMismatch : public DataError {
 public:
  using DataError::DataError;
};

class ChecksumMismatch : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFile : public DataError {
 public:
  using DataError::DataError;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace pcagan
