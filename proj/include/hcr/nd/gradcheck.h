#ifndef HCR_ND_GRADCHECK_H_
#define HCR_ND_GRADCHECK_H_

#include <cstddef>
#include <functional>
#include <string>

#include "hcr/nd/params.h"
#include "hcr/nd/tape.h"

namespace hcr::nd {

struct GradCheckOptions {
  double step = 1e-5;
  // Used when the +/- step crosses a ReLU kink; the coordinate is skipped if
  // the smaller step crosses one as well.
  double retry_step = 1e-7;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

// The loss function must build a deterministic scalar graph on the given
// tape (re-seed any dropout RNG inside it). Compares Tape::Backward against
// central differences on every trainable coordinate.
using LossBuilder = std::function<Var(Tape&)>;

GradCheckResult CheckGradients(ParamStore& params, const LossBuilder& build,
                               const GradCheckOptions& options = {});

}  // namespace hcr::nd

#endif  // HCR_ND_GRADCHECK_H_
