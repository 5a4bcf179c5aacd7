#pragma once

#include <stdexcept>
#include <string>

namespace crm {

/// Library-wide error with a machine-readable code. The CLI maps codes to
/// process exit codes (config -> 2, numerical -> 3).
class Error : public std::runtime_error {
 public:
  enum class Code {
    kInvalidGroup,
    kDecodeFailure,
    kEmptySupport,
    kEnumerationTooLarge,
    kUnsupportedArity,
    kDimensionTooSmall,
    kTrainingDiverged,
    kSupportMismatch,
    kInvalidArgument,
    kConfig,
    kIo,
  };

  Error(Code code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

}  // namespace crm
