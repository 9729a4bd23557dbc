#pragma once

#include <stdexcept>
#include <string>

namespace fractallab {

enum class ErrorKind {
  UnknownModel,
  RenormalizationFailure,
  GraphTooLarge,
  DomainError,
  DegenerateMeasure,
  ExtensionFailure,
  SpectralFailure,
  InsufficientGrid,
  DegenerateBall,
  DegenerateFamily,
  DegenerateFunction,
  ExponentMismatch,
  NotCritical,
  SubcriticalExponent,
  ExponentOutOfRange,
  MissingArtifact,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnknownModel: return "UnknownModel";
    case ErrorKind::RenormalizationFailure: return "RenormalizationFailure";
    case ErrorKind::GraphTooLarge: return "GraphTooLarge";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DegenerateMeasure: return "DegenerateMeasure";
    case ErrorKind::ExtensionFailure: return "ExtensionFailure";
    case ErrorKind::SpectralFailure: return "SpectralFailure";
    case ErrorKind::InsufficientGrid: return "InsufficientGrid";
    case ErrorKind::DegenerateBall: return "DegenerateBall";
    case ErrorKind::DegenerateFamily: return "DegenerateFamily";
    case ErrorKind::DegenerateFunction: return "DegenerateFunction";
    case ErrorKind::ExponentMismatch: return "ExponentMismatch";
    case ErrorKind::NotCritical: return "NotCritical";
    case ErrorKind::SubcriticalExponent: return "SubcriticalExponent";
    case ErrorKind::ExponentOutOfRange: return "ExponentOutOfRange";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fractallab
