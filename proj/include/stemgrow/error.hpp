#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stemgrow {

enum class ErrorKind {
  AgeNegative,
  NoNearbyBoundary,
  DegenerateGradient,
  InvalidScene,
  PenetrationExceeded,
  EmptyContactSet,
  Infeasible,
  MaxIterations,
  TooManyContacts,
  NoCandidateFeasible,
  InitialPenetration,
  InitialBreakdown,
  InvalidConfig,
  AntipodalAmbiguity,
  GridMismatch,
  NonPositiveDistance,
  InsufficientSamples,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure in the library is reported through this type; `kind()` is
/// stable and is what callers (and tests) branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stemgrow
