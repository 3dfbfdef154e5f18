#include "common/error.hpp"

namespace decor {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidSpec: return "invalid-spec";
    case ErrorKind::kConstraintViolation: return "constraint-violation";
    case ErrorKind::kMustMergeFirst: return "must-merge-first";
    case ErrorKind::kNoPath: return "no-path";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kInvalidScale: return "invalid-scale";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "unknown";
}

}  // namespace decor
