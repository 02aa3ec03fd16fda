#ifndef HCR_ND_LAYERS_H_
#define HCR_ND_LAYERS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hcr/nd/ops.h"
#include "hcr/nd/params.h"

namespace hcr::nd {

// Layer parameter bundles. Pointers refer into a ParamStore that outlives
// every forward pass using them.

struct Conv1DParams {
  Param* kernel = nullptr;  // [K, Cin, Cout]
  Param* bias = nullptr;    // [Cout]
};

struct BatchNormParams {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Param* running_mean = nullptr;
  Param* running_var = nullptr;
  double momentum = 0.99;
  double epsilon = 1e-5;
};

// One GRU direction; gate blocks ordered (z, r, candidate).
struct GruParams {
  Param* input_weights = nullptr;      // [D, 3H]
  Param* recurrent_weights = nullptr;  // [H, 3H]
  Param* bias = nullptr;               // [3H]

  std::size_t hidden() const { return bias->value.dim(0) / 3; }
};

struct BiGruParams {
  GruParams forward;
  GruParams backward;
};

struct DenseParams {
  Param* weights = nullptr;  // [D, 1]
  Param* bias = nullptr;     // [1]
};

// Parameter factories with Keras-default initializers: Glorot-uniform
// kernels, orthogonal recurrent matrices, zero biases, unit batch-norm scale.
Conv1DParams MakeConv1D(ParamStore& store, const std::string& prefix, std::size_t kernel_size,
                        std::size_t in_channels, std::size_t out_channels, Rng& rng, bool with_bias = true);
BatchNormParams MakeBatchNorm(ParamStore& store, const std::string& prefix, std::size_t channels,
                              double momentum = 0.99, double epsilon = 1e-5);
GruParams MakeGru(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                  std::size_t hidden, Rng& rng);
BiGruParams MakeBiGru(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden, Rng& rng);
DenseParams MakeDense(ParamStore& store, const std::string& prefix, std::size_t input_dim, Rng& rng);

Tensor GlorotUniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
// Rows x cols matrix with orthonormal rows or columns.
Tensor Orthogonal(std::size_t rows, std::size_t cols, Rng& rng);

// input [L,Cin] or [N,L,Cin] -> same rank with Cout channels.
Var Conv1DForward(Tape& tape, Var input, const Conv1DParams& params);

Var BatchNormForward(Tape& tape, Var batch, const BatchNormParams& params, Mode mode);

// [L,C] or [N,L,C] -> [C] or [N,C]; mask has L or N*L entries (empty = none).
Var GlobalAvgPool(Var input, std::span<const std::uint8_t> mask = {});

// x[D] or [B,D]; h_prev [H] or [B,H].
Var GruStep(Tape& tape, Var x, Var h_prev, const GruParams& params,
            std::span<const std::uint8_t> step_mask = {});

struct BiGruOutput {
  Var outputs;  // [B, T, 2H]
  Var final;    // [B, 2H]: forward state after the last step, backward state after the first
};

// seq [B,T,D] (or [T,D], treated as B = 1 and returned with B = 1).
// seq_mask holds B*T flags; masked steps carry the hidden state through.
// Initial states default to zeros.
BiGruOutput BiGruForward(Tape& tape, Var seq, std::span<const std::uint8_t> seq_mask,
                         const BiGruParams& params, Var h0_forward = {}, Var h0_backward = {});

// x [D] or [B,D] -> probabilities [B].
Var DenseSigmoid(Tape& tape, Var x, const DenseParams& params);

// lambda * sum of squares over the given parameters.
Var L2Penalty(Tape& tape, std::span<Param* const> params, double lambda);

}  // namespace hcr::nd

#endif  // HCR_ND_LAYERS_H_
