#ifndef HCR_ND_OPS_H_
#define HCR_ND_OPS_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hcr/nd/tape.h"

namespace hcr::nd {

enum class Mode { kTrain, kEval };

using Rng = std::mt19937_64;

// Differentiable primitives. Every op appends one node to the tape of its
// inputs; shapes are checked eagerly and mismatches raise contract errors.

Var Add(Var a, Var b);
Var Scale(Var x, double factor);
Var Sum(Var x);
Var SumSquares(Var x);
Var Relu(Var x);
Var Sigmoid(Var x);
Var Tanh(Var x);

// x[M,K] · w[K,N] + b[N] -> [M,N]. Bias may be an invalid Var.
Var Linear(Var x, Var w, Var b);

// x[N,L,Cin] (or [L,Cin]) cross-correlated with kernel[K,Cin,Cout] along L
// with (K-1)/2 zeros on each side; K must be odd. Output keeps the input's
// rank with Cout channels.
Var Conv1D(Var x, Var kernel, Var bias);

// Inverted dropout of whole channels: x[..., L, C] keeps or zeros each
// (sample, channel) map. Rank-2 input is one sample.
Var SpatialDropout(Var x, double p, Mode mode, Rng& rng);
// Elementwise inverted dropout.
Var Dropout(Var x, double p, Mode mode, Rng& rng);

struct BatchNormBuffers {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.99;
  double epsilon = 1e-5;
};

// Per-channel normalization over every axis but the last.
Var BatchNorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, Mode mode);

// x[N,L,C] -> [N,C] mean over L restricted to mask[N*L] (empty = all).
Var MaskedMeanPool(Var x, std::span<const std::uint8_t> mask);

// Fused GRU cell; gate blocks in w[D,3H], u[H,3H], b[3H] are ordered
// (update z, reset r, candidate). Rows whose step_mask entry is 0 copy
// h_prev through unchanged (empty mask = all active).
//   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
//   c = tanh(x Wc + (r*h) Uc + bc), h' = (1-z)*h + z*c
Var GruCell(Var x, Var h_prev, Var w, Var u, Var b, std::span<const std::uint8_t> step_mask = {});

// x[B,T,D] -> x[:, t, :] as [B,D].
Var TimeSlice(Var x, std::size_t t);
// T tensors of [B,D] -> [B,T,D].
Var StackSteps(const std::vector<Var>& steps);
// [B,D1] ++ [B,D2] -> [B,D1+D2]; also concatenates rank-1 vectors.
Var ConcatLast(Var a, Var b);
Var Reshape(Var x, Shape shape);

// Rows of table[V,E] selected by ids; id 0 (padding) and negative ids give
// zero rows and receive no gradient.
Var GatherRows(Var table, std::span<const std::int32_t> ids);

// Mean over examples of -[w_pos*y*ln p + w_neg*(1-y)*ln(1-p)] with p clamped
// to [eps, 1-eps]. p is [B] or [B,1].
Var WeightedBce(Var p, std::span<const double> labels, double w_pos, double w_neg,
                double eps = 1e-12);

}  // namespace hcr::nd

#endif  // HCR_ND_OPS_H_
