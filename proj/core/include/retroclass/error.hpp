#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace retroclass {

enum class ErrorCode {
  // embank
  kInvalidDimension,
  kDimensionMismatch,
  kZeroVector,
  kInvalidRecord,
  kCorruptBank,
  kIdOutOfRange,
  // vindex
  kSpaceMismatch,
  kEmptyBank,
  kInvalidK,
  kNotNormalized,
  kInvalidClusters,
  kTooManyClusters,
  kInvalidProbe,
  kCorruptIndex,
  kEmptyBaseline,
  // prompts
  kEmptyClassName,
  kPromptBankMismatch,
  kEmptyMerge,
  kDegenerateMerge,
  // enrich
  kEmptyScores,
  kInvalidTemperature,
  kInvalidWeights,
  kLengthMismatch,
  kBankMisalignment,
  kInvalidConfig,
  // classify
  kDegeneratePrototype,
  kDegenerateQuery,
  kInvalidM,
  // harness
  kLabelMismatch,
  kEmptyGrid,
  kInvalidFixture,
  kIoError,
  kInvariantViolation,
};

// Maps onto the CLI exit codes 2, 3 and 4.
enum class ErrorKind { kInput, kCorruption, kInternal };

std::string_view to_string(ErrorCode code) noexcept;
ErrorKind kind_of(ErrorCode code) noexcept;
int exit_code_for(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> byte_offset = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_of(code_); }
  // Set for corruption errors raised while decoding a file.
  std::optional<std::uint64_t> byte_offset() const noexcept { return byte_offset_; }

  // Same code and offset, message prefixed with "<context>: ".
  Error with_context(std::string_view context) const;

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> byte_offset_;
};

}  // namespace retroclass
