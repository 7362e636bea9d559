#ifndef NESTED_IS_ERROR_HPP
#define NESTED_IS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace nis {

enum class ErrorKind {
  NotSpd,
  NotSymmetric,
  NotSquare,
  DimensionMismatch,
  ConvergenceFailure,
  InvalidSpec,
  UnsupportedDims,
  DegenerateWeights,
  NonFiniteRelativeDensity,
  GridTooCoarse,
  IntegrationFailure,
  NoOracle,
  ParseError,
  ValidationError,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSpd: return "NotSpd";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::UnsupportedDims: return "UnsupportedDims";
    case ErrorKind::DegenerateWeights: return "DegenerateWeights";
    case ErrorKind::NonFiniteRelativeDensity: return "NonFiniteRelativeDensity";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::IntegrationFailure: return "IntegrationFailure";
    case ErrorKind::NoOracle: return "NoOracle";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nis

#endif  // NESTED_IS_ERROR_HPP
