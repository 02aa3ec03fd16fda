#include "hcr/train/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "hcr/common/error.h"

namespace hcr::train {
namespace {

std::vector<std::size_t> DescendingOrder(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  Check(scores.size() == labels.size(), ErrorKind::kContract,
        fmt::format("{} scores for {} labels", scores.size(), labels.size()));
  for (double s : scores) Check(!std::isnan(s), ErrorKind::kData, "NaN score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const auto order = DescendingOrder(scores, labels);
  std::int64_t pos = 0, neg = 0;
  for (auto y : labels) (y ? pos : neg) += 1;
  Check(pos > 0 && neg > 0, ErrorKind::kUndefinedMetric, "AUROC needs both classes");
  // Walk tie groups from the top; each positive beats every negative below
  // its group and ties the negatives inside it.
  std::int64_t twice = 0, neg_above = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::int64_t gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? gp : gn) += 1;
      ++j;
    }
    twice += gp * (2 * (neg - neg_above - gn) + gn);
    neg_above += gn;
    i = j;
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double Auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const auto order = DescendingOrder(scores, labels);
  std::int64_t total = 0;
  for (auto y : labels) total += y ? 1 : 0;
  Check(total > 0, ErrorKind::kUndefinedMetric, "AUPRC needs at least one positive");
  double ap = 0.0;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const std::int64_t before = tp;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    if (tp > before) {
      ap += static_cast<double>(tp - before) / static_cast<double>(total) *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    i = j;
  }
  return ap;
}

double WeightedBceValue(double p, bool label, double w_pos, double w_neg, double eps) {
  p = std::clamp(p, eps, 1.0 - eps);
  return label ? -w_pos * std::log(p) : -w_neg * std::log1p(-p);
}

namespace {

double BetaContinuedFraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double f = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    for (int half = 0; half < 2; ++half) {
      d = 1.0 + num * d;
      if (std::abs(d) < kTiny) d = kTiny;
      c = 1.0 + num / c;
      if (std::abs(c) < kTiny) c = kTiny;
      d = 1.0 / d;
      f *= c * d;
      num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    }
    if (std::abs(c * d - 1.0) < kEps) return f;
  }
  Fail(ErrorKind::kContract, fmt::format("incomplete beta did not converge (a={}, b={}, x={})", a, b, x));
}

}  // namespace

double IncompleteBeta(double a, double b, double x) {
  Check(a > 0 && b > 0, ErrorKind::kContract, "incomplete beta needs positive shape parameters");
  Check(x >= 0 && x <= 1, ErrorKind::kContract, "incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * BetaContinuedFraction(a, b, x) / a;
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double StudentTCdf(double t, double df) {
  Check(df > 0, ErrorKind::kContract, "t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * IncompleteBeta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult PairedTTestOneTailed(std::span<const double> a, std::span<const double> b) {
  Check(a.size() == b.size(), ErrorKind::kContract, "paired test needs equal-length vectors");
  Check(a.size() >= 2, ErrorKind::kContract, "paired test needs at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];
  TTestResult r;
  r.df = static_cast<double>(diff.size() - 1);
  const double mean = Mean(diff), sd = SampleSd(diff);
  if (sd == 0.0) {
    r.t = std::numeric_limits<double>::quiet_NaN();
    r.p = mean > 0 ? 0.0 : mean < 0 ? 1.0 : 0.5;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(diff.size())));
  // Upper tail directly, so small p keeps its precision.
  r.p = StudentTCdf(-r.t, r.df);
  return r;
}

double Mean(std::span<const double> xs) {
  Check(!xs.empty(), ErrorKind::kContract, "mean of nothing");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double SampleSd(std::span<const double> xs) {
  const double m = Mean(xs);
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string_view SignificanceMarker(double p) {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "†";
}

}  // namespace hcr::train
