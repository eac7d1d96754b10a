#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace revpkg {

enum class ErrorCode {
  // document model
  kEmptyDocument,
  kMalformedBlock,
  kAnchorOutOfRange,
  kFallbackRequired,
  // providers
  kProviderError,
  kMalformedProviderOutput,
  // ledger
  kEvidenceOutOfSpan,
  // verification
  kIncompleteSetting,
  // annotations / package
  kDuplicateAnnotation,
  kBadGeometry,
  kGraphViolation,
  kNotReady,
  kBundleFormat,
  // coverage evaluation
  kEmptyDenominator,
  kDuplicateLabel,
  kMalformedRecord,
  // ranking evaluation
  kUnknownSystem,
  kDuplicateSystem,
  kEmptyChain,
  kMalformedToken,
  kDisconnectedComparisons,
  kDegenerateMLE,
  kInvalidAbility,
  kBootstrapFailed,
  // plumbing
  kIOError,
  kConfigError,
};

// Coarse failure classes; the CLI maps each to a distinct exit code.
enum class ErrorClass { kValidation, kProvider, kIO };

std::string_view to_string(ErrorCode code);
ErrorClass classify(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // Record index for MalformedBlock-style errors.
  std::optional<std::size_t> index() const noexcept { return index_; }

  // Returns a copy whose message is prefixed by the pipeline stage.
  Error with_context(std::string_view stage) const;

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace revpkg
