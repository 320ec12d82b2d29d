#include "retroclass/error.hpp"

namespace retroclass {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "InvalidDimension";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kInvalidRecord: return "InvalidRecord";
    case ErrorCode::kCorruptBank: return "CorruptBank";
    case ErrorCode::kIdOutOfRange: return "IdOutOfRange";
    case ErrorCode::kSpaceMismatch: return "SpaceMismatch";
    case ErrorCode::kEmptyBank: return "EmptyBank";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kInvalidClusters: return "InvalidClusters";
    case ErrorCode::kTooManyClusters: return "TooManyClusters";
    case ErrorCode::kInvalidProbe: return "InvalidProbe";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kEmptyBaseline: return "EmptyBaseline";
    case ErrorCode::kEmptyClassName: return "EmptyClassName";
    case ErrorCode::kPromptBankMismatch: return "PromptBankMismatch";
    case ErrorCode::kEmptyMerge: return "EmptyMerge";
    case ErrorCode::kDegenerateMerge: return "DegenerateMerge";
    case ErrorCode::kEmptyScores: return "EmptyScores";
    case ErrorCode::kInvalidTemperature: return "InvalidTemperature";
    case ErrorCode::kInvalidWeights: return "InvalidWeights";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kBankMisalignment: return "BankMisalignment";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kDegeneratePrototype: return "DegeneratePrototype";
    case ErrorCode::kDegenerateQuery: return "DegenerateQuery";
    case ErrorCode::kInvalidM: return "InvalidM";
    case ErrorCode::kLabelMismatch: return "LabelMismatch";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kInvalidFixture: return "InvalidFixture";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kCorruptBank:
    case ErrorCode::kCorruptIndex:
      return ErrorKind::kCorruption;
    case ErrorCode::kInvariantViolation:
      return ErrorKind::kInternal;
    default:
      return ErrorKind::kInput;
  }
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInput: return 2;
    case ErrorKind::kCorruption: return 3;
    case ErrorKind::kInternal: return 4;
  }
  return 4;
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::uint64_t> offset) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (offset) {
    out += " (at byte offset " + std::to_string(*offset) + ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::uint64_t> byte_offset)
    : std::runtime_error(format_message(code, message, byte_offset)),
      code_(code),
      byte_offset_(byte_offset) {}

Error Error::with_context(std::string_view context) const {
  Error copy = *this;
  static_cast<std::runtime_error&>(copy) =
      std::runtime_error(std::string(context) + ": " + what());
  return copy;
}

}  // namespace retroclass
