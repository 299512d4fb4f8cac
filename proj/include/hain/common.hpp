#ifndef HAIN_COMMON_HPP
#define HAIN_COMMON_HPP

#include <stdexcept>
#include <string>

namespace hain {

inline constexpr const char* kToolVersion = "1.0.0";

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands; the message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input exceeds a hard capacity guard (e.g. exact Shapley enumeration).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed external input (CSV, JSON config, checkpoint header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Stored artifact failed a length or checksum integrity check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Stored artifact has an unsupported format version.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numeric evaluation produced a non-finite value where one is forbidden.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the epoch at which the loss became non-finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, std::size_t epoch)
      : Error(msg), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace hain

#endif  // HAIN_COMMON_HPP
