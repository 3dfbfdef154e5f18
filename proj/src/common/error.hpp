#pragma once

#include <stdexcept>
#include <string>

namespace decor {

enum class ErrorKind {
  kInvalidSpec,
  kConstraintViolation,
  kMustMergeFirst,
  kNoPath,
  kParse,
  kValidation,
  kInvalidScale,
  kProtocol,
  kContract,
  kConfig,
  kIo,
  kNumerical,
};

const char* to_string(ErrorKind kind);

// Single exception type for the core; the C API maps `kind()` to a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace decor
