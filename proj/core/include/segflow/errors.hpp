#pragma once

#include <stdexcept>
#include <string>

namespace segflow {

// Invalid configuration (bad sizes, channel lists, lambda, ranges).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched tensor shapes between values that must align.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or missing data at runtime: unreadable files, empty masks,
// zero valid flow pixels, malformed dataset layouts.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// File container problems (.flo / .png): bad magic, truncation,
// nonsensical header fields. Each call site states which.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace segflow
