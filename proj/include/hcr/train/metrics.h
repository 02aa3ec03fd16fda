#ifndef HCR_TRAIN_METRICS_H_
#define HCR_TRAIN_METRICS_H_

#include <cstdint>
#include <span>
#include <string_view>

namespace hcr::train {

// Probability that a random positive outscores a random negative, ties at
// half credit. Needs both classes.
double Auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Step-wise average precision over descending distinct thresholds,
// sum of (R_n - R_{n-1}) * P_n. Needs at least one positive.
double Auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Per-example -[w_pos y ln p + w_neg (1-y) ln(1-p)], p clamped to [eps, 1-eps].
double WeightedBceValue(double p, bool label, double w_pos, double w_neg, double eps = 1e-12);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double IncompleteBeta(double a, double b, double x);
double StudentTCdf(double t, double df);

struct TTestResult {
  double t = 0.0;  // NaN when the differences have zero variance
  double df = 0.0;
  double p = 0.5;
};

// One-tailed paired test of mean(b - a) > 0. Zero-variance differences give
// p = 0, 1 or 0.5 for positive, negative or zero mean.
TTestResult PairedTTestOneTailed(std::span<const double> a, std::span<const double> b);

double Mean(std::span<const double> xs);
// n - 1 denominator; zero for a single value.
double SampleSd(std::span<const double> xs);

// "**" below 0.01, "*" below 0.05, otherwise the dagger.
std::string_view SignificanceMarker(double p);

}  // namespace hcr::train

#endif  // HCR_TRAIN_METRICS_H_
