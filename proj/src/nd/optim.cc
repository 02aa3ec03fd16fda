#include "hcr/nd/optim.h"

#include <algorithm>
#include <cmath>

#include "hcr/common/error.h"

namespace hcr::nd {

void AmsGradUpdate(std::span<double> param, std::span<const double> grad, Moments& moments,
                   const OptimizerState& state) {
  Check(param.size() == grad.size() && moments.m.size() == param.size() &&
            moments.v.size() == param.size() && moments.v_hat.size() == param.size(),
        ErrorKind::kContract, "AMSGrad: state shape does not match parameter");
  Check(state.step >= 1, ErrorKind::kContract, "AMSGrad: step count must be positive");
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  double* m = moments.m.raw();
  double* v = moments.v.raw();
  double* vh = moments.v_hat.raw();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
    vh[i] = std::max(vh[i], v[i]);
    const double m_hat = m[i] / c1;
    const double v_corr = vh[i] / c2;
    param[i] -= state.learning_rate * m_hat / (std::sqrt(v_corr) + state.epsilon);
  }
}

void AmsGradStep(ParamStore& params, OptimizerState& state) {
  ++state.step;
  for (Param& p : params) {
    if (!p.trainable) continue;
    auto it = state.moments.find(p.name);
    if (it == state.moments.end()) {
      Moments fresh{Tensor(p.value.shape()), Tensor(p.value.shape()), Tensor(p.value.shape())};
      it = state.moments.emplace(p.name, std::move(fresh)).first;
    }
    AmsGradUpdate(p.value.data(), p.grad.data(), it->second, state);
  }
}

}  // namespace hcr::nd
