#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace veda {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments: dimension mismatch, invalid parameters, duplicate ids.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data. `offset()` is the byte offset of the bad record.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Access policy violations, e.g. a vector without any role.
class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Query issued for a role the layout does not know about.
class AuthorizationError : public Error {
 public:
  using Error::Error;
};

/// An exclusive block that no lattice node holds.
class CoverageError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace veda
