// Independent scalar-loop reference implementations used only by tests.
#ifndef HCR_TESTS_ORACLES_H_
#define HCR_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <cstdint>
#include <vector>

namespace hcr::oracle {

using Matrix = std::vector<std::vector<double>>;

// out[l][o] = b[o] + sum_k sum_c x[l + k - pad][c] * w[k][c][o]
inline Matrix Conv1D(const Matrix& x, const std::vector<Matrix>& w, const std::vector<double>& b) {
  const int len = static_cast<int>(x.size());
  const int k = static_cast<int>(w.size());
  const int cin = static_cast<int>(w[0].size());
  const int cout = static_cast<int>(w[0][0].size());
  const int pad = (k - 1) / 2;
  Matrix out(len, std::vector<double>(cout, 0.0));
  for (int l = 0; l < len; ++l) {
    for (int o = 0; o < cout; ++o) {
      double s = b.empty() ? 0.0 : b[o];
      for (int j = 0; j < k; ++j) {
        const int src = l + j - pad;
        if (src < 0 || src >= len) continue;
        for (int c = 0; c < cin; ++c) s += x[src][c] * w[j][c][o];
      }
      out[l][o] = s;
    }
  }
  return out;
}

inline double Sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// W is D x 3H, U is H x 3H, b is 3H; gate order (z, r, candidate).
inline std::vector<double> GruStep(const std::vector<double>& x, const std::vector<double>& h,
                                   const Matrix& W, const Matrix& U, const std::vector<double>& b) {
  const std::size_t d = x.size(), hs = h.size();
  std::vector<double> z(hs), r(hs), out(hs);
  for (std::size_t j = 0; j < hs; ++j) {
    double az = b[j], ar = b[hs + j];
    for (std::size_t i = 0; i < d; ++i) {
      az += x[i] * W[i][j];
      ar += x[i] * W[i][hs + j];
    }
    for (std::size_t k = 0; k < hs; ++k) {
      az += h[k] * U[k][j];
      ar += h[k] * U[k][hs + j];
    }
    z[j] = Sigmoid(az);
    r[j] = Sigmoid(ar);
  }
  for (std::size_t j = 0; j < hs; ++j) {
    double ac = b[2 * hs + j];
    for (std::size_t i = 0; i < d; ++i) ac += x[i] * W[i][2 * hs + j];
    for (std::size_t k = 0; k < hs; ++k) ac += r[k] * h[k] * U[k][2 * hs + j];
    const double c = std::tanh(ac);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * c;
  }
  return out;
}

struct GruWeights {
  Matrix W, U;
  std::vector<double> b;
};

// Two explicit passes over one sequence; masked steps carry state through.
// Returns per-step [h_fwd ; h_bwd] rows and the final vector.
inline std::pair<Matrix, std::vector<double>> BiGru(const Matrix& seq, const std::vector<std::uint8_t>& mask,
                                                    const GruWeights& fwd, const GruWeights& bwd) {
  const std::size_t steps = seq.size();
  const std::size_t hf = fwd.b.size() / 3, hb = bwd.b.size() / 3;
  Matrix f(steps), bk(steps);
  std::vector<double> h(hf, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    if (mask.empty() || mask[t]) h = GruStep(seq[t], h, fwd.W, fwd.U, fwd.b);
    f[t] = h;
  }
  std::vector<double> g(hb, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    if (mask.empty() || mask[t]) g = GruStep(seq[t], g, bwd.W, bwd.U, bwd.b);
    bk[t] = g;
  }
  Matrix outputs(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    outputs[t] = f[t];
    outputs[t].insert(outputs[t].end(), bk[t].begin(), bk[t].end());
  }
  std::vector<double> final = f[steps - 1];
  final.insert(final.end(), bk[0].begin(), bk[0].end());
  return {outputs, final};
}

// AUROC by comparing every positive with every negative; ties count half.
inline double PairwiseAuroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::int64_t twice = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) ++pos; else ++neg;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Average precision by sweeping every distinct score as a threshold and
// counting hits at or above it from scratch.
inline double SweepAuprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::int64_t total_pos = 0;
  for (int y : labels) total_pos += y;
  double ap = 0.0;
  std::int64_t prev_tp = 0;
  for (double thr : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= thr) {
        if (labels[i]) ++tp; else ++fp;
      }
    }
    const std::int64_t dtp = tp - prev_tp;
    if (dtp > 0) {
      ap += static_cast<double>(dtp) / static_cast<double>(total_pos) *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    prev_tp = tp;
  }
  return ap;
}

}  // namespace hcr::oracle

#endif  // HCR_TESTS_ORACLES_H_
