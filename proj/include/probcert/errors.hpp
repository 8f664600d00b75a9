#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace probcert {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in an input or an intermediate result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter outside its admissible range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed model or report file. Carries the layer index or byte offset
/// where the problem was detected, when known.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::optional<std::size_t> layer = {},
              std::optional<std::size_t> byte_offset = {})
      : Error(what), layer_(layer), byte_offset_(byte_offset) {}

  std::optional<std::size_t> layer() const noexcept { return layer_; }
  std::optional<std::size_t> byte_offset() const noexcept { return byte_offset_; }

 private:
  std::optional<std::size_t> layer_;
  std::optional<std::size_t> byte_offset_;
};

}  // namespace probcert
