#include "hcr/nd/ops.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include <Eigen/Core>

#include "hcr/common/error.h"

namespace hcr::nd {
namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::RowVectorXd>;
using CMapV = Eigen::Map<const Eigen::RowVectorXd>;

CMapM AsMatrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapM(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapM AsMatrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapM(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void RequireShape(bool ok, const char* op, const std::string& detail) {
  Check(ok, ErrorKind::kContract, std::string(op) + ": " + detail);
}

void Accumulate(Tape& tape, Var target, const Tensor& g) {
  if (!tape.requires_grad(target)) return;
  auto dst = tape.GradBuffer(target.id()).data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void CheckDropProbability(double p, const char* op) {
  Check(p >= 0.0 && p < 1.0, ErrorKind::kConfig,
        std::string(op) + ": drop probability must lie in [0, 1), got " + std::to_string(p));
}

// Fills patches[N*L, K*Cin] for a "same" cross-correlation.
void Im2Col(const double* x, std::size_t n, std::size_t len, std::size_t cin, std::size_t k,
            double* patches) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t row = k * cin;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t l = 0; l < len; ++l) {
      double* dst = patches + (s * len + l) * row;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t src_l = static_cast<std::ptrdiff_t>(l) + static_cast<std::ptrdiff_t>(j) - pad;
        if (src_l < 0 || src_l >= static_cast<std::ptrdiff_t>(len)) {
          std::memset(dst + j * cin, 0, cin * sizeof(double));
        } else {
          std::memcpy(dst + j * cin, x + (s * len + static_cast<std::size_t>(src_l)) * cin,
                      cin * sizeof(double));
        }
      }
    }
  }
}

void Col2ImAdd(const double* patches, std::size_t n, std::size_t len, std::size_t cin, std::size_t k,
               double* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t row = k * cin;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = patches + (s * len + l) * row;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t dst_l = static_cast<std::ptrdiff_t>(l) + static_cast<std::ptrdiff_t>(j) - pad;
        if (dst_l < 0 || dst_l >= static_cast<std::ptrdiff_t>(len)) continue;
        double* d = dx + (s * len + static_cast<std::size_t>(dst_l)) * cin;
        const double* p = src + j * cin;
        for (std::size_t c = 0; c < cin; ++c) d[c] += p[c];
      }
    }
  }
}

}  // namespace

Var Add(Var a, Var b) {
  RequireShape(a.shape() == b.shape(), "Add",
               ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  Tape& tape = *a.tape();
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.GradBuffer(self);
    Accumulate(t, a, g);
    Accumulate(t, b, g);
  });
}

Var Scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return x.tape()->Record(std::move(out), {x}, [x, factor](Tape& t, int self) {
    const Tensor& g = t.GradBuffer(self);
    auto dx = t.GradBuffer(x.id()).data();
    auto gv = g.data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * gv[i];
  });
}

Var Sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape()->Record(Tensor::Scalar(s), {x}, [x](Tape& t, int self) {
    const double g = t.GradBuffer(self)[0];
    for (double& d : t.GradBuffer(x.id()).data()) d += g;
  });
}

Var SumSquares(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v * v;
  return x.tape()->Record(Tensor::Scalar(s), {x}, [x](Tape& t, int self) {
    const double g = t.GradBuffer(self)[0];
    auto xv = t.value(x.id()).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += 2.0 * g * xv[i];
  });
}

Var Relu(Var x) {
  Tape& tape = *x.tape();
  Tensor out = x.value();
  if (tape.track_activations()) {
    std::uint64_t bits = 0;
    int used = 0;
    for (double v : out.data()) {
      bits = (bits << 1) | (v > 0.0 ? 1u : 0u);
      if (++used == 64) {
        tape.MixSignature(bits);
        bits = 0;
        used = 0;
      }
    }
    tape.MixSignature(bits ^ static_cast<std::uint64_t>(used));
  }
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.Record(std::move(out), {x}, [x](Tape& t, int self) {
    auto g = t.GradBuffer(self).data();
    auto xv = t.value(x.id()).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var Sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = StableSigmoid(v);
  return x.tape()->Record(std::move(out), {x}, [x](Tape& t, int self) {
    auto g = t.GradBuffer(self).data();
    auto y = t.value(self).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  return x.tape()->Record(std::move(out), {x}, [x](Tape& t, int self) {
    auto g = t.GradBuffer(self).data();
    auto y = t.value(self).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Linear(Var x, Var w, Var b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  RequireShape(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[0], "Linear",
               "x " + ShapeString(xs) + " incompatible with w " + ShapeString(ws));
  const std::size_t m = xs[0], k = xs[1], n = ws[1];
  if (b.valid()) {
    RequireShape(b.shape() == Shape{n}, "Linear", "bias shape " + ShapeString(b.shape()));
  }
  Tensor out(Shape{m, n});
  auto y = AsMatrix(out, m, n);
  y.noalias() = AsMatrix(x.value(), m, k) * AsMatrix(w.value(), k, n);
  if (b.valid()) y.rowwise() += CMapV(b.value().raw(), static_cast<Eigen::Index>(n));
  Tape& tape = *x.tape();
  return tape.Record(std::move(out), {x, w, b}, [x, w, b, m, k, n](Tape& t, int self) {
    auto g = AsMatrix(t.GradBuffer(self), m, n);
    if (t.requires_grad(x)) {
      AsMatrix(t.GradBuffer(x.id()), m, k).noalias() += g * AsMatrix(t.value(w.id()), k, n).transpose();
    }
    if (t.requires_grad(w)) {
      AsMatrix(t.GradBuffer(w.id()), k, n).noalias() += AsMatrix(t.value(x.id()), m, k).transpose() * g;
    }
    if (b.valid() && t.requires_grad(b)) {
      MapV(t.GradBuffer(b.id()).raw(), static_cast<Eigen::Index>(n)) += g.colwise().sum();
    }
  });
}

Var Conv1D(Var x, Var kernel, Var bias) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  RequireShape(xs.size() == 2 || xs.size() == 3, "Conv1D", "input must be [L,C] or [N,L,C]");
  RequireShape(ks.size() == 3, "Conv1D", "kernel must be [K,Cin,Cout]");
  const std::size_t n = xs.size() == 3 ? xs[0] : 1;
  const std::size_t len = xs[xs.size() - 2];
  const std::size_t cin = xs.back();
  const std::size_t k = ks[0], cout = ks[2];
  Check(ks[1] == cin, ErrorKind::kConfig,
        "Conv1D: input has " + std::to_string(cin) + " channels but kernel expects " +
            std::to_string(ks[1]));
  Check(k % 2 == 1, ErrorKind::kConfig, "Conv1D: kernel size must be odd");
  RequireShape(len >= 1, "Conv1D", "empty input");
  if (bias.valid()) {
    RequireShape(bias.shape() == Shape{cout}, "Conv1D", "bias shape " + ShapeString(bias.shape()));
  }
  const std::size_t rows = n * len, kc = k * cin;
  std::vector<double> patches(rows * kc);
  Im2Col(x.value().raw(), n, len, cin, k, patches.data());
  Shape out_shape = xs;
  out_shape.back() = cout;
  Tensor out(out_shape);
  auto y = AsMatrix(out, rows, cout);
  y.noalias() = CMapM(patches.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kc)) *
                AsMatrix(kernel.value(), kc, cout);
  if (bias.valid()) y.rowwise() += CMapV(bias.value().raw(), static_cast<Eigen::Index>(cout));
  Tape& tape = *x.tape();
  return tape.Record(std::move(out), {x, kernel, bias},
                     [x, kernel, bias, n, len, cin, k, cout, rows, kc](Tape& t, int self) {
    auto g = AsMatrix(t.GradBuffer(self), rows, cout);
    if (t.requires_grad(kernel)) {
      std::vector<double> p(rows * kc);
      Im2Col(t.value(x.id()).raw(), n, len, cin, k, p.data());
      AsMatrix(t.GradBuffer(kernel.id()), kc, cout).noalias() +=
          CMapM(p.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kc)).transpose() * g;
    }
    if (bias.valid() && t.requires_grad(bias)) {
      MapV(t.GradBuffer(bias.id()).raw(), static_cast<Eigen::Index>(cout)) += g.colwise().sum();
    }
    if (t.requires_grad(x)) {
      MatRM dp = g * AsMatrix(t.value(kernel.id()), kc, cout).transpose();
      Col2ImAdd(dp.data(), n, len, cin, k, t.GradBuffer(x.id()).raw());
    }
  });
}

Var SpatialDropout(Var x, double p, Mode mode, Rng& rng) {
  CheckDropProbability(p, "SpatialDropout");
  if (mode == Mode::kEval || p == 0.0) return x;
  const Shape& xs = x.shape();
  RequireShape(xs.size() == 2 || xs.size() == 3, "SpatialDropout", "input must be [L,C] or [N,L,C]");
  const std::size_t n = xs.size() == 3 ? xs[0] : 1;
  const std::size_t len = xs[xs.size() - 2];
  const std::size_t c = xs.back();
  auto scale = std::make_shared<std::vector<double>>(n * c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& s : *scale) s = u(rng) < p ? 0.0 : 1.0 / (1.0 - p);
  Tensor out = x.value();
  double* o = out.raw();
  for (std::size_t s = 0; s < n; ++s) {
    const double* sc = scale->data() + s * c;
    for (std::size_t l = 0; l < len; ++l) {
      double* row = o + (s * len + l) * c;
      for (std::size_t j = 0; j < c; ++j) row[j] *= sc[j];
    }
  }
  return x.tape()->Record(std::move(out), {x}, [x, scale, n, len, c](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    double* dx = t.GradBuffer(x.id()).raw();
    for (std::size_t s = 0; s < n; ++s) {
      const double* sc = scale->data() + s * c;
      for (std::size_t l = 0; l < len; ++l) {
        const std::size_t base = (s * len + l) * c;
        for (std::size_t j = 0; j < c; ++j) dx[base + j] += g[base + j] * sc[j];
      }
    }
  });
}

Var Dropout(Var x, double p, Mode mode, Rng& rng) {
  CheckDropProbability(p, "Dropout");
  if (mode == Mode::kEval || p == 0.0) return x;
  auto scale = std::make_shared<std::vector<double>>(x.value().size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& s : *scale) s = u(rng) < p ? 0.0 : 1.0 / (1.0 - p);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*scale)[i];
  return x.tape()->Record(std::move(out), {x}, [x, scale](Tape& t, int self) {
    auto g = t.GradBuffer(self).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (*scale)[i];
  });
}

Var BatchNorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, Mode mode) {
  const Shape& xs = x.shape();
  RequireShape(!xs.empty(), "BatchNorm", "scalar input");
  const std::size_t c = xs.back();
  const std::size_t m = x.value().size() / c;
  RequireShape(gamma.shape() == Shape{c} && beta.shape() == Shape{c}, "BatchNorm",
               "gamma/beta must be [" + std::to_string(c) + "]");
  Check(buffers.running_mean && buffers.running_var && buffers.running_mean->shape() == Shape{c} &&
            buffers.running_var->shape() == Shape{c},
        ErrorKind::kContract, "BatchNorm: running statistics missing or misshapen");
  const double eps = buffers.epsilon;
  const double* xv = x.value().raw();
  const double* gv = gamma.value().raw();
  const double* bv = beta.value().raw();

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (mode == Mode::kTrain) {
    Check(m >= 2, ErrorKind::kDegenerateBatch,
          "BatchNorm: training needs at least 2 values per channel, got " + std::to_string(m));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) mean[j] += xv[i * c + j];
    }
    for (double& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv[i * c + j] - mean[j];
        var[j] += d * d;
      }
    }
    for (double& v : var) v /= static_cast<double>(m);
    Tensor& rm = *buffers.running_mean;
    Tensor& rv = *buffers.running_var;
    const double mom = buffers.momentum;
    const double bessel = static_cast<double>(m) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < c; ++j) {
      rm[j] = mom * rm[j] + (1.0 - mom) * mean[j];
      rv[j] = mom * rv[j] + (1.0 - mom) * var[j] * bessel;
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = (*buffers.running_mean)[j];
      var[j] = (*buffers.running_var)[j];
    }
  }
  auto inv_std = std::make_shared<std::vector<double>>(c);
  for (std::size_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(var[j] + eps);
  auto xhat = std::make_shared<std::vector<double>>(m * c);
  Tensor out(xs);
  double* o = out.raw();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv[i * c + j] - mean[j]) * (*inv_std)[j];
      (*xhat)[i * c + j] = h;
      o[i * c + j] = gv[j] * h + bv[j];
    }
  }
  const bool train = mode == Mode::kTrain;
  return x.tape()->Record(std::move(out), {x, gamma, beta},
                          [x, gamma, beta, xhat, inv_std, m, c, train](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    const double* gam = t.value(gamma.id()).raw();
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        sum_g[j] += g[i * c + j];
        sum_gx[j] += g[i * c + j] * (*xhat)[i * c + j];
      }
    }
    if (t.requires_grad(gamma)) {
      double* dg = t.GradBuffer(gamma.id()).raw();
      for (std::size_t j = 0; j < c; ++j) dg[j] += sum_gx[j];
    }
    if (t.requires_grad(beta)) {
      double* db = t.GradBuffer(beta.id()).raw();
      for (std::size_t j = 0; j < c; ++j) db[j] += sum_g[j];
    }
    if (!t.requires_grad(x)) return;
    double* dx = t.GradBuffer(x.id()).raw();
    if (train) {
      // dxhat = g*gamma; dx = inv_std/m * (m*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
      const double md = static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const double k = gam[j] * (*inv_std)[j] / md;
          dx[i * c + j] += k * (md * g[i * c + j] - sum_g[j] - (*xhat)[i * c + j] * sum_gx[j]);
        }
      }
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += g[i * c + j] * gam[j] * (*inv_std)[j];
      }
    }
  });
}

Var MaskedMeanPool(Var x, std::span<const std::uint8_t> mask) {
  const Shape& xs = x.shape();
  RequireShape(xs.size() == 3, "MaskedMeanPool", "input must be [N,L,C]");
  const std::size_t n = xs[0], len = xs[1], c = xs[2];
  RequireShape(mask.empty() || mask.size() == n * len, "MaskedMeanPool",
               "mask has " + std::to_string(mask.size()) + " entries, expected " + std::to_string(n * len));
  auto weights = std::make_shared<std::vector<double>>(n * len);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t count = 0;
    for (std::size_t l = 0; l < len; ++l) count += mask.empty() || mask[s * len + l] ? 1 : 0;
    Check(count > 0, ErrorKind::kEmptyNote, "MaskedMeanPool: note " + std::to_string(s) + " is fully masked");
    for (std::size_t l = 0; l < len; ++l) {
      (*weights)[s * len + l] = (mask.empty() || mask[s * len + l]) ? 1.0 / static_cast<double>(count) : 0.0;
    }
  }
  Tensor out(Shape{n, c});
  const double* xv = x.value().raw();
  for (std::size_t s = 0; s < n; ++s) {
    double* o = out.raw() + s * c;
    for (std::size_t l = 0; l < len; ++l) {
      const double w = (*weights)[s * len + l];
      if (w == 0.0) continue;
      const double* row = xv + (s * len + l) * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += w * row[j];
    }
  }
  return x.tape()->Record(std::move(out), {x}, [x, weights, n, len, c](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    double* dx = t.GradBuffer(x.id()).raw();
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t l = 0; l < len; ++l) {
        const double w = (*weights)[s * len + l];
        if (w == 0.0) continue;
        double* d = dx + (s * len + l) * c;
        for (std::size_t j = 0; j < c; ++j) d[j] += w * g[s * c + j];
      }
    }
  });
}

Var GruCell(Var x, Var h_prev, Var w, Var u, Var b, std::span<const std::uint8_t> step_mask) {
  const Shape& xs = x.shape();
  const Shape& hs = h_prev.shape();
  RequireShape(xs.size() == 2 && hs.size() == 2 && xs[0] == hs[0], "GruCell",
               "x " + ShapeString(xs) + " and h " + ShapeString(hs) + " must be [B,D] and [B,H]");
  const std::size_t batch = xs[0], d = xs[1], h = hs[1];
  RequireShape(w.shape() == Shape{d, 3 * h} && u.shape() == Shape{h, 3 * h} && b.shape() == Shape{3 * h},
               "GruCell", "weights must be w[D,3H], u[H,3H], b[3H]; got " + ShapeString(w.shape()) + ", " +
                              ShapeString(u.shape()) + ", " + ShapeString(b.shape()));
  RequireShape(step_mask.empty() || step_mask.size() == batch, "GruCell", "step mask size");
  const auto eb = static_cast<Eigen::Index>(batch);
  const auto eh = static_cast<Eigen::Index>(h);

  struct Cache {
    MatRM z, r, c, rh;
    std::vector<std::uint8_t> active;
  };
  auto cache = std::make_shared<Cache>();
  cache->active.assign(batch, 1);
  for (std::size_t i = 0; i < step_mask.size(); ++i) cache->active[i] = step_mask[i] ? 1 : 0;

  const auto X = AsMatrix(x.value(), batch, d);
  const auto H = AsMatrix(h_prev.value(), batch, h);
  const auto W = AsMatrix(w.value(), d, 3 * h);
  const auto U = AsMatrix(u.value(), h, 3 * h);
  const CMapV bias(b.value().raw(), 3 * eh);

  MatRM gx = X * W;
  gx.rowwise() += bias;
  MatRM gh = H * U.leftCols(2 * eh);
  cache->z = (gx.leftCols(eh) + gh.leftCols(eh)).unaryExpr([](double v) { return StableSigmoid(v); });
  cache->r = (gx.middleCols(eh, eh) + gh.rightCols(eh)).unaryExpr([](double v) { return StableSigmoid(v); });
  cache->rh = cache->r.cwiseProduct(H);
  cache->c = (gx.rightCols(eh) + cache->rh * U.rightCols(eh)).unaryExpr([](double v) { return std::tanh(v); });

  Tensor out(Shape{batch, h});
  auto hn = AsMatrix(out, batch, h);
  for (Eigen::Index i = 0; i < eb; ++i) {
    if (cache->active[static_cast<std::size_t>(i)]) {
      hn.row(i) = (1.0 - cache->z.row(i).array()).matrix().cwiseProduct(H.row(i)) +
                  cache->z.row(i).cwiseProduct(cache->c.row(i));
    } else {
      hn.row(i) = H.row(i);
    }
  }

  return x.tape()->Record(std::move(out), {x, h_prev, w, u, b},
                          [x, h_prev, w, u, b, cache, batch, d, h](Tape& t, int self) {
    const auto eh = static_cast<Eigen::Index>(h);
    const auto G = AsMatrix(t.GradBuffer(self), batch, h);
    const auto Hp = AsMatrix(t.value(h_prev.id()), batch, h);
    const auto U = AsMatrix(t.value(u.id()), h, 3 * h);
    const MatRM& z = cache->z;
    const MatRM& r = cache->r;
    const MatRM& c = cache->c;

    MatRM dgates(batch, 3 * h);  // pre-activation grads: [z | r | c]
    MatRM dh = MatRM::Zero(batch, h);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      if (!cache->active[i]) {
        dgates.row(row).setZero();
        dh.row(row) = G.row(row);
        continue;
      }
      for (Eigen::Index j = 0; j < eh; ++j) {
        const double g = G(row, j);
        const double zz = z(row, j), cc = c(row, j);
        dgates(row, j) = g * (cc - Hp(row, j)) * zz * (1.0 - zz);
        dgates(row, 2 * eh + j) = g * zz * (1.0 - cc * cc);
        dh(row, j) = g * (1.0 - zz);
      }
    }
    // Candidate path through r*h.
    MatRM drh = dgates.rightCols(eh) * U.rightCols(eh).transpose();
    for (std::size_t i = 0; i < batch; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      if (!cache->active[i]) {
        dgates.row(row).segment(eh, eh).setZero();
        continue;
      }
      for (Eigen::Index j = 0; j < eh; ++j) {
        const double rr = r(row, j);
        dgates(row, eh + j) = drh(row, j) * Hp(row, j) * rr * (1.0 - rr);
        dh(row, j) += drh(row, j) * rr;
      }
    }
    dh.noalias() += dgates.leftCols(2 * eh) * U.leftCols(2 * eh).transpose();

    if (t.requires_grad(h_prev)) AsMatrix(t.GradBuffer(h_prev.id()), batch, h) += dh;
    if (t.requires_grad(u)) {
      auto dU = AsMatrix(t.GradBuffer(u.id()), h, 3 * h);
      dU.leftCols(2 * eh).noalias() += Hp.transpose() * dgates.leftCols(2 * eh);
      dU.rightCols(eh).noalias() += cache->rh.transpose() * dgates.rightCols(eh);
    }
    if (t.requires_grad(w)) {
      AsMatrix(t.GradBuffer(w.id()), d, 3 * h).noalias() +=
          AsMatrix(t.value(x.id()), batch, d).transpose() * dgates;
    }
    if (t.requires_grad(b)) {
      MapV(t.GradBuffer(b.id()).raw(), 3 * eh) += dgates.colwise().sum();
    }
    if (t.requires_grad(x)) {
      AsMatrix(t.GradBuffer(x.id()), batch, d).noalias() +=
          dgates * AsMatrix(t.value(w.id()), d, 3 * h).transpose();
    }
  });
}

Var TimeSlice(Var x, std::size_t step) {
  const Shape& xs = x.shape();
  RequireShape(xs.size() == 3 && step < xs[1], "TimeSlice",
               "step " + std::to_string(step) + " of " + ShapeString(xs));
  const std::size_t batch = xs[0], steps = xs[1], d = xs[2];
  Tensor out(Shape{batch, d});
  for (std::size_t i = 0; i < batch; ++i) {
    std::memcpy(out.raw() + i * d, x.value().raw() + (i * steps + step) * d, d * sizeof(double));
  }
  return x.tape()->Record(std::move(out), {x}, [x, batch, steps, d, step](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    double* dx = t.GradBuffer(x.id()).raw();
    for (std::size_t i = 0; i < batch; ++i) {
      double* dst = dx + (i * steps + step) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
    }
  });
}

Var StackSteps(const std::vector<Var>& steps) {
  RequireShape(!steps.empty(), "StackSteps", "no steps");
  const Shape& s0 = steps[0].shape();
  RequireShape(s0.size() == 2, "StackSteps", "steps must be [B,D]");
  const std::size_t batch = s0[0], d = s0[1], n = steps.size();
  Tensor out(Shape{batch, n, d});
  for (std::size_t t = 0; t < n; ++t) {
    RequireShape(steps[t].shape() == s0, "StackSteps", "ragged steps");
    const double* src = steps[t].value().raw();
    for (std::size_t i = 0; i < batch; ++i) {
      std::memcpy(out.raw() + (i * n + t) * d, src + i * d, d * sizeof(double));
    }
  }
  return steps[0].tape()->Record(std::move(out), steps, [steps, batch, d, n](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    for (std::size_t s = 0; s < n; ++s) {
      if (!t.requires_grad(steps[s])) continue;
      double* dst = t.GradBuffer(steps[s].id()).raw();
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < d; ++j) dst[i * d + j] += g[(i * n + s) * d + j];
      }
    }
  });
}

Var ConcatLast(Var a, Var b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  RequireShape(as.size() == bs.size() && (as.size() == 1 || (as.size() == 2 && as[0] == bs[0])),
               "ConcatLast", ShapeString(as) + " with " + ShapeString(bs));
  const std::size_t rows = as.size() == 2 ? as[0] : 1;
  const std::size_t da = as.back(), db = bs.back();
  Shape out_shape = as;
  out_shape.back() = da + db;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < rows; ++i) {
    std::memcpy(out.raw() + i * (da + db), a.value().raw() + i * da, da * sizeof(double));
    std::memcpy(out.raw() + i * (da + db) + da, b.value().raw() + i * db, db * sizeof(double));
  }
  return a.tape()->Record(std::move(out), {a, b}, [a, b, rows, da, db](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    if (t.requires_grad(a)) {
      double* d = t.GradBuffer(a.id()).raw();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < da; ++j) d[i * da + j] += g[i * (da + db) + j];
      }
    }
    if (t.requires_grad(b)) {
      double* d = t.GradBuffer(b.id()).raw();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < db; ++j) d[i * db + j] += g[i * (da + db) + da + j];
      }
    }
  });
}

Var Reshape(Var x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  return x.tape()->Record(std::move(out), {x}, [x](Tape& t, int self) {
    auto g = t.GradBuffer(self).data();
    auto dx = t.GradBuffer(x.id()).data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
  });
}

Var GatherRows(Var table, std::span<const std::int32_t> ids) {
  const Shape& ts = table.shape();
  RequireShape(ts.size() == 2, "GatherRows", "table must be [V,E]");
  const std::size_t v = ts[0], e = ts[1];
  Tensor out(Shape{ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int32_t id = ids[i];
    Check(id < static_cast<std::int64_t>(v), ErrorKind::kData,
          "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(v));
    if (id <= 0) continue;
    std::memcpy(out.raw() + i * e, table.value().raw() + static_cast<std::size_t>(id) * e, e * sizeof(double));
  }
  std::vector<std::int32_t> kept(ids.begin(), ids.end());
  return table.tape()->Record(std::move(out), {table}, [table, kept = std::move(kept), e](Tape& t, int self) {
    const double* g = t.GradBuffer(self).raw();
    double* d = t.GradBuffer(table.id()).raw();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i] <= 0) continue;
      double* row = d + static_cast<std::size_t>(kept[i]) * e;
      for (std::size_t j = 0; j < e; ++j) row[j] += g[i * e + j];
    }
  });
}

Var WeightedBce(Var p, std::span<const double> labels, double w_pos, double w_neg, double eps) {
  const std::size_t n = p.value().size();
  RequireShape(n == labels.size() && n > 0, "WeightedBce",
               std::to_string(n) + " probabilities for " + std::to_string(labels.size()) + " labels");
  const double* pv = p.value().raw();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(pv[i], eps, 1.0 - eps);
    loss -= w_pos * labels[i] * std::log(q) + w_neg * (1.0 - labels[i]) * std::log(1.0 - q);
  }
  loss /= static_cast<double>(n);
  std::vector<double> y(labels.begin(), labels.end());
  return p.tape()->Record(Tensor::Scalar(loss), {p},
                          [p, y = std::move(y), w_pos, w_neg, eps, n](Tape& t, int self) {
    const double g = t.GradBuffer(self)[0] / static_cast<double>(n);
    const double* pv = t.value(p.id()).raw();
    double* dp = t.GradBuffer(p.id()).raw();
    for (std::size_t i = 0; i < n; ++i) {
      if (pv[i] < eps || pv[i] > 1.0 - eps) continue;  // clamped region is flat
      dp[i] += -g * (w_pos * y[i] / pv[i] - w_neg * (1.0 - y[i]) / (1.0 - pv[i]));
    }
  });
}

}  // namespace hcr::nd
