#ifndef HCR_TRAIN_REPORT_H_
#define HCR_TRAIN_REPORT_H_

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace hcr::train {

struct FoldMetrics {
  std::string model;
  int window = 0;
  int fold = 0;
  double auroc = 0.0;
  double auprc = 0.0;
};

struct MetricSummary {
  std::vector<double> folds;  // indexed by fold
  double mean = 0.0;
  double sd = 0.0;
  // One-tailed paired p-value against the best model of the same window;
  // empty for that model itself or when it is the only one.
  std::optional<double> p_value;
  std::string marker;
};

struct ReportRow {
  std::string model;
  int window = 0;
  MetricSummary auroc;
  MetricSummary auprc;
};

struct MetricsReport {
  int folds = 0;
  std::vector<ReportRow> rows;  // sorted by model rank, then window
};

// Throws kData when any (model, window) lacks one of folds 0..k-1 or repeats one.
MetricsReport BuildReport(std::span<const FoldMetrics> metrics, int folds);

// Models as rows, windows x {AUROC, AUPRC} as columns, "mean ± sd marker".
std::string RenderTable(const MetricsReport& report);

// One record per fold, then one summary record per row.
void WriteReportJsonl(std::ostream& out, const MetricsReport& report);

void WriteFoldMetricsJsonl(std::ostream& out, std::span<const FoldMetrics> metrics);
std::vector<FoldMetrics> ReadFoldMetricsJsonl(std::istream& in, const std::string& source = "<stream>");

}  // namespace hcr::train

#endif  // HCR_TRAIN_REPORT_H_
