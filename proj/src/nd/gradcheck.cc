#include "hcr/nd/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace hcr::nd {
namespace {

std::pair<double, std::uint64_t> Evaluate(const LossBuilder& build) {
  Tape tape(false);
  tape.set_track_activations(true);
  const Var loss = build(tape);
  return {loss.value().item(), tape.activation_signature()};
}

}  // namespace

GradCheckResult CheckGradients(ParamStore& params, const LossBuilder& build,
                               const GradCheckOptions& options) {
  params.ZeroGrad();
  std::uint64_t base_signature = 0;
  {
    Tape tape(true);
    tape.set_track_activations(true);
    const Var loss = build(tape);
    base_signature = tape.activation_signature();
    tape.Backward(loss);
  }
  GradCheckResult result;
  for (Param& p : params) {
    if (!p.trainable) continue;
    const std::vector<double> analytic(p.grad.data().begin(), p.grad.data().end());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double original = p.value[i];
      double numeric = 0.0;
      bool ok = false;
      for (double h : {options.step, options.retry_step}) {
        p.value[i] = original + h;
        const auto [plus, sig_plus] = Evaluate(build);
        p.value[i] = original - h;
        const auto [minus, sig_minus] = Evaluate(build);
        p.value[i] = original;
        if (sig_plus == base_signature && sig_minus == base_signature) {
          numeric = (plus - minus) / (2.0 * h);
          ok = true;
          break;
        }
      }
      if (!ok) {
        ++result.skipped_kinks;
        continue;
      }
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_coordinate = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace hcr::nd
