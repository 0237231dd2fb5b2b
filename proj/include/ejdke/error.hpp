#pragma once

#include <stdexcept>
#include <string>

namespace ejdke {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
  kInvalidArgument = 3,
  kConfig = 4,
  kDimensionMismatch = 5,
  kFormat = 6,
  kNumerical = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  const char* kind_name() const noexcept {
    switch (kind_) {
      case ErrorKind::kInvalidArgument: return "invalid_argument";
      case ErrorKind::kConfig: return "config";
      case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
      case ErrorKind::kFormat: return "format";
      case ErrorKind::kNumerical: return "numerical";
    }
    return "unknown";
  }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error(ErrorKind::kInvalidArgument, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& w) : Error(ErrorKind::kDimensionMismatch, w) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::kFormat, w) {}
};

/// Raised when a numerical procedure cannot produce a finite, converged value
/// (simulation blow-up, quadrature that does not settle within its budget).
struct NumericalError : Error {
  NumericalError(const std::string& w, double residual = 0.0)
      : Error(ErrorKind::kNumerical, w), residual(residual) {}
  double residual;
};

}  // namespace ejdke
