#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lranker {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape, range, kind mismatch).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A file does not follow the expected layout (magic, version, tensor set).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file ended early or holds impossible values at a known byte offset.
class CorruptionError : public FormatError {
 public:
  CorruptionError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Raised by the finite-difference probe when the probed function is non-finite.
class ProbeError : public Error {
 public:
  using Error::Error;
};

}  // namespace lranker
