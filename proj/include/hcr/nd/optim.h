#ifndef HCR_ND_OPTIM_H_
#define HCR_ND_OPTIM_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "hcr/nd/params.h"

namespace hcr::nd {

// Per-parameter AMSGrad moments.
struct Moments {
  Tensor m;
  Tensor v;
  Tensor v_hat;  // running elementwise max of v
};

struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::map<std::string, Moments> moments;
};

// One AMSGrad update with bias correction on a single array:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  v_hat <- max(v_hat, v)
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v_hat / (1-b2^t)) + eps)
// `step` is the already-incremented t.
void AmsGradUpdate(std::span<double> param, std::span<const double> grad, Moments& moments,
                   const OptimizerState& state);

// Advances state.step by one and updates every trainable parameter from its
// accumulated gradient. Moments are created lazily on the first step.
void AmsGradStep(ParamStore& params, OptimizerState& state);

}  // namespace hcr::nd

#endif  // HCR_ND_OPTIM_H_
