// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvpatch {

enum class ErrorKind {
  // geometry
  TooFewPoints,
  DegenerateConfiguration,
  AtInfinity,
  Singular,
  // imaging
  EmptyIntersection,
  DegenerateQuad,
  // loss / optimizer
  PatchTooSmall,
  ShapeMismatch,
  MissingForwardRecord,
  // detector
  ImageTooSmall,
  BridgeUnavailable,
  ProtocolError,
  VersionMismatch,
  BridgeError,
  CapabilityMismatch,
  // evaluation
  EmptyDenominator,
  UndefinedForZeroClean,
  MissingHomography,
  // dataset / io
  ParseError,
  MissingFile,
  DuplicateFrame,
  InvalidBox,
  IoError,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::AtInfinity: return "AtInfinity";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::DegenerateQuad: return "DegenerateQuad";
    case ErrorKind::PatchTooSmall: return "PatchTooSmall";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingForwardRecord: return "MissingForwardRecord";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::BridgeUnavailable: return "BridgeUnavailable";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::BridgeError: return "BridgeError";
    case ErrorKind::CapabilityMismatch: return "CapabilityMismatch";
    case ErrorKind::EmptyDenominator: return "EmptyDenominator";
    case ErrorKind::UndefinedForZeroClean: return "UndefinedForZeroClean";
    case ErrorKind::MissingHomography: return "MissingHomography";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::DuplicateFrame: return "DuplicateFrame";
    case ErrorKind::InvalidBox: return "InvalidBox";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure in the toolkit is reported as an Error carrying its kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

/// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitDetector = 3,
  kExitGeometry = 4,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AtInfinity:
    case ErrorKind::Singular:
    case ErrorKind::DegenerateQuad:
    case ErrorKind::MissingHomography:
      return kExitGeometry;
    case ErrorKind::ImageTooSmall:
    case ErrorKind::BridgeUnavailable:
    case ErrorKind::ProtocolError:
    case ErrorKind::VersionMismatch:
    case ErrorKind::BridgeError:
    case ErrorKind::CapabilityMismatch:
      return kExitDetector;
    default:
      return kExitInput;
  }
}

}  // namespace mvpatch
