#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unimts {

enum class ErrorKind {
  TooShort,
  NonUnitQuaternion,
  BadQuaternion,
  NegativeSigma,
  BadRate,
  BadRange,
  ShapeMismatch,
  NonFinite,
  BadStrategy,
  BadLength,
  BadConfig,
  DimMismatch,
  EmptyText,
  Empty,
  EmptyDataset,
  UnknownLocation,
  DuplicateJoint,
  DuplicateId,
  UnknownId,
  ParseError,
  CorruptCheckpoint,
  VersionMismatch,
  SkeletonMismatch,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorKind::BadQuaternion: return "BadQuaternion";
    case ErrorKind::NegativeSigma: return "NegativeSigma";
    case ErrorKind::BadRate: return "BadRate";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::BadStrategy: return "BadStrategy";
    case ErrorKind::BadLength: return "BadLength";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnknownLocation: return "UnknownLocation";
    case ErrorKind::DuplicateJoint: return "DuplicateJoint";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::SkeletonMismatch: return "SkeletonMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// ParseError with the 1-based line number folded into the message.
inline Error parse_error(const std::string& source, std::size_t line,
                         const std::string& what) {
  return Error(ErrorKind::ParseError,
               source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace unimts
