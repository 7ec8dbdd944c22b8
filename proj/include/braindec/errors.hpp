#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace braindec {

/// Base class for all toolkit errors. `exit_code()` follows the CLI contract:
/// 2 usage/config, 3 data consistency, 4 capacity.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

class ArgumentError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class PathError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class LookupError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed NPY payload. `offset()` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedDtypeError : public Error {
 public:
  explicit UnsupportedDtypeError(const std::string& descr)
      : Error("unsupported dtype descriptor '" + descr + "'"), descr_(descr) {}
  const std::string& descriptor() const noexcept { return descr_; }

 private:
  std::string descr_;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf or otherwise unusable numeric input.
class DataError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace braindec
