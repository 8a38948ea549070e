#include "stemgrow/error.hpp"

namespace stemgrow {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AgeNegative: return "AgeNegative";
    case ErrorKind::NoNearbyBoundary: return "NoNearbyBoundary";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::InvalidScene: return "InvalidScene";
    case ErrorKind::PenetrationExceeded: return "PenetrationExceeded";
    case ErrorKind::EmptyContactSet: return "EmptyContactSet";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::TooManyContacts: return "TooManyContacts";
    case ErrorKind::NoCandidateFeasible: return "NoCandidateFeasible";
    case ErrorKind::InitialPenetration: return "InitialPenetration";
    case ErrorKind::InitialBreakdown: return "InitialBreakdown";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::AntipodalAmbiguity: return "AntipodalAmbiguity";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NonPositiveDistance: return "NonPositiveDistance";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace stemgrow
