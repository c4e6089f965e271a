#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fixsal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor dimensions or an invalid dimension argument.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but mathematically degenerate (zero norm, empty mask, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A computation would produce (or received) a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required file or directory is absent.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// Malformed tensor/PGM file. offset() is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace fixsal
