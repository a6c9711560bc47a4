// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIXITKIT_ERROR_HPP_
#define MIXITKIT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixitkit {

enum class ErrorKind {
  kAllZeroSignal,
  kShapeMismatch,
  kUnsupportedFormat,
  kIo,
  kIncompatibleConfig,
  kZeroReference,
  kZeroMixture,
  kTooManySources,
  kSingularGram,
  kUnreadableFile,
  kInsufficientData,
  kDegenerateBatch,
  kBandMismatch,
  kStaleCache,
  kNonFiniteGradient,
  kInvalidSelection,
  kEmptyValidation,
  kMissingStem,
  kNoScorableChunks,
  kBadCheckpoint,
  kConfig,
};

std::string_view ErrorKindName(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mixitkit

#endif  // MIXITKIT_ERROR_HPP_
