#include "hcr/common/error.h"

namespace hcr {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config error";
    case ErrorKind::kMissingArtifact:
      return "missing artifact";
    case ErrorKind::kData:
      return "data error";
    case ErrorKind::kContract:
      return "contract violation";
    case ErrorKind::kEmptyNote:
      return "empty note";
    case ErrorKind::kDegenerateBatch:
      return "degenerate batch";
    case ErrorKind::kUndefinedMetric:
      return "undefined metric";
  }
  return "error";
}

void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace hcr
