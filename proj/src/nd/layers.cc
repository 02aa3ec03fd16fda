#include "hcr/nd/layers.h"

#include <cmath>

#include <Eigen/Core>
#include <Eigen/QR>

#include "hcr/common/error.h"

namespace hcr::nd {

Tensor GlorotUniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

Tensor Orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
  const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(big), static_cast<Eigen::Index>(small));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = n(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  // Sign fix so the result is uniformly distributed.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Tensor t(Shape{rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      t.at(i, j) = rows >= cols ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return t;
}

Conv1DParams MakeConv1D(ParamStore& store, const std::string& prefix, std::size_t kernel_size,
                        std::size_t in_channels, std::size_t out_channels, Rng& rng, bool with_bias) {
  Conv1DParams p;
  p.kernel = &store.Add(prefix + ".kernel",
                        GlorotUniform(Shape{kernel_size, in_channels, out_channels},
                                      kernel_size * in_channels, kernel_size * out_channels, rng),
                        true, true);
  if (with_bias) p.bias = &store.Add(prefix + ".bias", Tensor(Shape{out_channels}));
  return p;
}

BatchNormParams MakeBatchNorm(ParamStore& store, const std::string& prefix, std::size_t channels,
                              double momentum, double epsilon) {
  BatchNormParams p;
  p.gamma = &store.Add(prefix + ".gamma", Tensor(Shape{channels}, 1.0));
  p.beta = &store.Add(prefix + ".beta", Tensor(Shape{channels}));
  p.running_mean = &store.Add(prefix + ".running_mean", Tensor(Shape{channels}), false);
  p.running_var = &store.Add(prefix + ".running_var", Tensor(Shape{channels}, 1.0), false);
  p.momentum = momentum;
  p.epsilon = epsilon;
  return p;
}

GruParams MakeGru(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                  std::size_t hidden, Rng& rng) {
  GruParams p;
  p.input_weights = &store.Add(prefix + ".W",
                               GlorotUniform(Shape{input_dim, 3 * hidden}, input_dim, 3 * hidden, rng),
                               true, true);
  // Each gate's recurrent block is orthogonal on its own.
  Tensor u(Shape{hidden, 3 * hidden});
  for (std::size_t gate = 0; gate < 3; ++gate) {
    const Tensor block = Orthogonal(hidden, hidden, rng);
    for (std::size_t i = 0; i < hidden; ++i) {
      for (std::size_t j = 0; j < hidden; ++j) u.at(i, gate * hidden + j) = block.at(i, j);
    }
  }
  p.recurrent_weights = &store.Add(prefix + ".U", std::move(u), true, true);
  p.bias = &store.Add(prefix + ".b", Tensor(Shape{3 * hidden}));
  return p;
}

BiGruParams MakeBiGru(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden, Rng& rng) {
  BiGruParams p;
  p.forward = MakeGru(store, prefix + ".fwd", input_dim, hidden, rng);
  p.backward = MakeGru(store, prefix + ".bwd", input_dim, hidden, rng);
  return p;
}

DenseParams MakeDense(ParamStore& store, const std::string& prefix, std::size_t input_dim, Rng& rng) {
  DenseParams p;
  p.weights = &store.Add(prefix + ".W", GlorotUniform(Shape{input_dim, 1}, input_dim, 1, rng));
  p.bias = &store.Add(prefix + ".b", Tensor(Shape{1}));
  return p;
}

Var Conv1DForward(Tape& tape, Var input, const Conv1DParams& params) {
  return Conv1D(input, tape.Leaf(*params.kernel), params.bias ? tape.Leaf(*params.bias) : Var());
}

Var BatchNormForward(Tape& tape, Var batch, const BatchNormParams& params, Mode mode) {
  BatchNormBuffers buffers;
  buffers.running_mean = &params.running_mean->value;
  buffers.running_var = &params.running_var->value;
  buffers.momentum = params.momentum;
  buffers.epsilon = params.epsilon;
  return BatchNorm(batch, tape.Leaf(*params.gamma), tape.Leaf(*params.beta), buffers, mode);
}

Var GlobalAvgPool(Var input, std::span<const std::uint8_t> mask) {
  const Shape& s = input.shape();
  if (s.size() == 2) {
    Var pooled = MaskedMeanPool(Reshape(input, Shape{1, s[0], s[1]}), mask);
    return Reshape(pooled, Shape{s[1]});
  }
  return MaskedMeanPool(input, mask);
}

Var GruStep(Tape& tape, Var x, Var h_prev, const GruParams& params,
            std::span<const std::uint8_t> step_mask) {
  const bool vector = x.shape().size() == 1;
  if (vector) {
    x = Reshape(x, Shape{1, x.shape()[0]});
    h_prev = Reshape(h_prev, Shape{1, h_prev.shape()[0]});
  }
  Var h = GruCell(x, h_prev, tape.Leaf(*params.input_weights), tape.Leaf(*params.recurrent_weights),
                  tape.Leaf(*params.bias), step_mask);
  return vector ? Reshape(h, Shape{h.shape()[1]}) : h;
}

BiGruOutput BiGruForward(Tape& tape, Var seq, std::span<const std::uint8_t> seq_mask,
                         const BiGruParams& params, Var h0_forward, Var h0_backward) {
  if (seq.shape().size() == 2) seq = Reshape(seq, Shape{1, seq.shape()[0], seq.shape()[1]});
  Check(seq.shape().size() == 3, ErrorKind::kContract, "BiGruForward: sequence must be [B,T,D]");
  const std::size_t batch = seq.shape()[0], steps = seq.shape()[1];
  Check(steps >= 1, ErrorKind::kEmptyNote, "BiGruForward: empty sequence");
  Check(seq_mask.empty() || seq_mask.size() == batch * steps, ErrorKind::kContract,
        "BiGruForward: mask size mismatch");
  const std::size_t hf = params.forward.hidden(), hb = params.backward.hidden();

  std::vector<std::uint8_t> step_mask;
  auto mask_at = [&](std::size_t t) -> std::span<const std::uint8_t> {
    if (seq_mask.empty()) return {};
    step_mask.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) step_mask[i] = seq_mask[i * steps + t];
    return step_mask;
  };

  std::vector<Var> fwd(steps), bwd(steps);
  Var h = h0_forward.valid() ? h0_forward : tape.Constant(Tensor(Shape{batch, hf}));
  for (std::size_t t = 0; t < steps; ++t) {
    h = GruStep(tape, TimeSlice(seq, t), h, params.forward, mask_at(t));
    fwd[t] = h;
  }
  h = h0_backward.valid() ? h0_backward : tape.Constant(Tensor(Shape{batch, hb}));
  for (std::size_t t = steps; t-- > 0;) {
    h = GruStep(tape, TimeSlice(seq, t), h, params.backward, mask_at(t));
    bwd[t] = h;
  }
  std::vector<Var> merged(steps);
  for (std::size_t t = 0; t < steps; ++t) merged[t] = ConcatLast(fwd[t], bwd[t]);
  BiGruOutput out;
  out.outputs = StackSteps(merged);
  out.final = ConcatLast(fwd[steps - 1], bwd[0]);
  return out;
}

Var DenseSigmoid(Tape& tape, Var x, const DenseParams& params) {
  if (x.shape().size() == 1) x = Reshape(x, Shape{1, x.shape()[0]});
  Var logits = Linear(x, tape.Leaf(*params.weights), tape.Leaf(*params.bias));
  return Reshape(Sigmoid(logits), Shape{logits.shape()[0]});
}

Var L2Penalty(Tape& tape, std::span<Param* const> params, double lambda) {
  Check(lambda >= 0.0, ErrorKind::kConfig, "L2Penalty: negative decay coefficient");
  if (lambda == 0.0 || params.empty()) return tape.Constant(Tensor::Scalar(0.0));
  Var total = SumSquares(tape.Leaf(*params[0]));
  for (std::size_t i = 1; i < params.size(); ++i) total = Add(total, SumSquares(tape.Leaf(*params[i])));
  return Scale(total, lambda);
}

}  // namespace hcr::nd
