#include "revpkg/error.hpp"

#include <fmt/format.h>

namespace revpkg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kMalformedBlock: return "MalformedBlock";
    case ErrorCode::kAnchorOutOfRange: return "AnchorOutOfRange";
    case ErrorCode::kFallbackRequired: return "FallbackRequired";
    case ErrorCode::kProviderError: return "ProviderError";
    case ErrorCode::kMalformedProviderOutput: return "MalformedProviderOutput";
    case ErrorCode::kEvidenceOutOfSpan: return "EvidenceOutOfSpan";
    case ErrorCode::kIncompleteSetting: return "IncompleteSetting";
    case ErrorCode::kDuplicateAnnotation: return "DuplicateAnnotation";
    case ErrorCode::kBadGeometry: return "BadGeometry";
    case ErrorCode::kGraphViolation: return "GraphViolation";
    case ErrorCode::kNotReady: return "NotReady";
    case ErrorCode::kBundleFormat: return "BundleFormat";
    case ErrorCode::kEmptyDenominator: return "EmptyDenominator";
    case ErrorCode::kDuplicateLabel: return "DuplicateLabel";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kUnknownSystem: return "UnknownSystem";
    case ErrorCode::kDuplicateSystem: return "DuplicateSystem";
    case ErrorCode::kEmptyChain: return "EmptyChain";
    case ErrorCode::kMalformedToken: return "MalformedToken";
    case ErrorCode::kDisconnectedComparisons: return "DisconnectedComparisons";
    case ErrorCode::kDegenerateMLE: return "DegenerateMLE";
    case ErrorCode::kInvalidAbility: return "InvalidAbility";
    case ErrorCode::kBootstrapFailed: return "BootstrapFailed";
    case ErrorCode::kIOError: return "IOError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::kProviderError:
    case ErrorCode::kMalformedProviderOutput:
      return ErrorClass::kProvider;
    case ErrorCode::kIOError:
      return ErrorClass::kIO;
    default:
      return ErrorClass::kValidation;
  }
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)),
      code_(code),
      index_(index) {}

Error Error::with_context(std::string_view stage) const {
  // what() already carries the code prefix; keep it after the stage tag.
  Error copy = *this;
  static_cast<std::runtime_error&>(copy) =
      std::runtime_error(fmt::format("[{}] {}", stage, what()));
  return copy;
}

}  // namespace revpkg
