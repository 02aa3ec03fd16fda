#ifndef HCR_COMMON_ERROR_H_
#define HCR_COMMON_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace hcr {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  kConfig,           // invalid configuration or arguments
  kMissingArtifact,  // a predecessor stage output is absent or stale
  kData,             // malformed or inconsistent input records
  kContract,         // caller violated an operation precondition
  kEmptyNote,        // note (or sequence) with no real content
  kDegenerateBatch,  // batch statistics undefined
  kUndefinedMetric,  // metric undefined for the given labels
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);

inline void Check(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace hcr

#endif  // HCR_COMMON_ERROR_H_
