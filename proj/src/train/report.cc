#include "hcr/train/report.h"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "hcr/common/error.h"
#include "hcr/train/metrics.h"
#include "json.hpp"

namespace hcr::train {
namespace {

int ModelRank(const std::string& name) {
  static const std::vector<std::string> kOrder = {"cts-rnn", "notes-hcr", "mm-hcr"};
  const auto it = std::find(kOrder.begin(), kOrder.end(), name);
  return it == kOrder.end() ? static_cast<int>(kOrder.size()) : static_cast<int>(it - kOrder.begin());
}

MetricSummary Summarize(std::vector<double> folds) {
  MetricSummary s;
  s.mean = Mean(folds);
  s.sd = SampleSd(folds);
  s.folds = std::move(folds);
  return s;
}

// Marks every row of one window against that window's best mean.
void MarkWindow(std::vector<ReportRow*>& rows, MetricSummary ReportRow::*metric) {
  if (rows.size() < 2) return;
  const ReportRow* best = *std::max_element(rows.begin(), rows.end(), [&](const ReportRow* a, const ReportRow* b) {
    return (a->*metric).mean < (b->*metric).mean;
  });
  for (ReportRow* r : rows) {
    if (r == best) continue;
    MetricSummary& s = r->*metric;
    s.p_value = PairedTTestOneTailed(s.folds, (best->*metric).folds).p;
    s.marker = std::string(SignificanceMarker(*s.p_value));
  }
}

std::size_t DisplayWidth(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string PadRight(const std::string& s, std::size_t width) {
  return s + std::string(width - std::min(width, DisplayWidth(s)), ' ');
}

}  // namespace

MetricsReport BuildReport(std::span<const FoldMetrics> metrics, int folds) {
  Check(folds >= 2, ErrorKind::kContract, "a report needs at least two folds");
  std::map<std::pair<std::string, int>, std::map<int, const FoldMetrics*>> groups;
  for (const auto& m : metrics) {
    Check(m.fold >= 0 && m.fold < folds, ErrorKind::kData,
          fmt::format("{} W={} reports fold {} outside 0..{}", m.model, m.window, m.fold, folds - 1));
    auto& g = groups[{m.model, m.window}];
    Check(g.emplace(m.fold, &m).second, ErrorKind::kData,
          fmt::format("{} W={} reports fold {} twice", m.model, m.window, m.fold));
  }
  Check(!groups.empty(), ErrorKind::kData, "incomplete report: no fold metrics");
  MetricsReport report;
  report.folds = folds;
  for (const auto& [key, g] : groups) {
    Check(static_cast<int>(g.size()) == folds, ErrorKind::kData,
          fmt::format("incomplete report: {} W={} has {} of {} folds", key.first, key.second, g.size(), folds));
    std::vector<double> auroc, auprc;
    for (const auto& [fold, m] : g) {
      auroc.push_back(m->auroc);
      auprc.push_back(m->auprc);
    }
    report.rows.push_back({key.first, key.second, Summarize(std::move(auroc)), Summarize(std::move(auprc))});
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const int ra = ModelRank(a.model), rb = ModelRank(b.model);
    if (ra != rb) return ra < rb;
    if (a.model != b.model) return a.model < b.model;
    return a.window < b.window;
  });
  std::map<int, std::vector<ReportRow*>> by_window;
  for (auto& r : report.rows) by_window[r.window].push_back(&r);
  for (auto& [w, rows] : by_window) {
    MarkWindow(rows, &ReportRow::auroc);
    MarkWindow(rows, &ReportRow::auprc);
  }
  return report;
}

std::string RenderTable(const MetricsReport& report) {
  std::set<int> windows;
  std::vector<std::string> models;
  for (const auto& r : report.rows) {
    windows.insert(r.window);
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Model"};
  for (int w : windows) {
    header.push_back(fmt::format("W={} AUROC", w));
    header.push_back(fmt::format("W={} AUPRC", w));
  }
  cells.push_back(header);
  auto cell = [](const MetricSummary& s) { return fmt::format("{:.4f} ± {:.4f}{}", s.mean, s.sd, s.marker); };
  for (const auto& m : models) {
    std::vector<std::string> line = {m};
    for (int w : windows) {
      const auto it = std::find_if(report.rows.begin(), report.rows.end(),
                                   [&](const ReportRow& r) { return r.model == m && r.window == w; });
      line.push_back(it == report.rows.end() ? "-" : cell(it->auroc));
      line.push_back(it == report.rows.end() ? "-" : cell(it->auprc));
    }
    cells.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], DisplayWidth(line[c]));
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      if (c) line += "  ";
      line += PadRight(cells[i][c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  out += fmt::format("Mean ± sample sd over {} folds. Against the best model per column: ** p < 0.01, * p < 0.05, "
                     "† not significant (one-tailed paired t-test).\n",
                     report.folds);
  return out;
}

void WriteReportJsonl(std::ostream& out, const MetricsReport& report) {
  using nlohmann::json;
  for (const auto& r : report.rows) {
    for (int f = 0; f < report.folds; ++f) {
      out << json{{"type", "fold"}, {"model", r.model}, {"window", r.window}, {"fold", f},
                  {"auroc", r.auroc.folds[f]}, {"auprc", r.auprc.folds[f]}}.dump()
          << '\n';
    }
  }
  auto summary = [](const MetricSummary& s) {
    json j = {{"mean", s.mean}, {"sd", s.sd}, {"marker", s.marker}};
    j["p_value"] = s.p_value ? json(*s.p_value) : json(nullptr);
    return j;
  };
  for (const auto& r : report.rows) {
    out << json{{"type", "summary"}, {"model", r.model}, {"window", r.window}, {"folds", report.folds},
                {"auroc", summary(r.auroc)}, {"auprc", summary(r.auprc)}}.dump()
        << '\n';
  }
}

void WriteFoldMetricsJsonl(std::ostream& out, std::span<const FoldMetrics> metrics) {
  for (const auto& m : metrics) {
    out << nlohmann::json{{"model", m.model}, {"window", m.window}, {"fold", m.fold}, {"auroc", m.auroc},
                          {"auprc", m.auprc}}.dump()
        << '\n';
  }
}

std::vector<FoldMetrics> ReadFoldMetricsJsonl(std::istream& in, const std::string& source) {
  std::vector<FoldMetrics> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("model").get<std::string>(), j.at("window").get<int>(), j.at("fold").get<int>(),
                     j.at("auroc").get<double>(), j.at("auprc").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kData, fmt::format("{}:{}: {}", source, n, e.what()));
    }
  }
  return out;
}

}  // namespace hcr::train
