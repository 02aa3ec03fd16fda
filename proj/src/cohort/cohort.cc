#include "hcr/cohort/cohort.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "hcr/common/csv.h"
#include "hcr/common/error.h"

namespace hcr::cohort {
namespace {

std::int64_t ParseInt(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kData, fmt::format("{}: not an integer: '{}'", where, s));
}

double ParseDouble(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kData, fmt::format("{}: not a number: '{}'", where, s));
}

Timestamp ParseTime(const std::string& s, const std::string& where) {
  const auto t = Timestamp::Parse(s);
  Check(t.has_value(), ErrorKind::kData, fmt::format("{}: bad timestamp '{}'", where, s));
  return *t;
}

std::vector<std::string> SplitUnits(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t bar = s.find('|', start);
    const std::string part = s.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    if (!part.empty()) out.push_back(part);
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return out;
}

std::ifstream OpenInput(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorKind::kMissingArtifact, "cannot open " + path.string());
  return in;
}

}  // namespace

const std::array<VariableSpec, kNumVariables>& Variables() {
  static const std::array<VariableSpec, kNumVariables> kVars = {{
      {"capillary_refill_rate", 0.0, 1.0},
      {"diastolic_blood_pressure", 59.0, 15.0},
      {"fraction_inspired_oxygen", 0.21, 0.2},
      {"gcs_eye_opening", 4.0, 1.0},
      {"gcs_motor_response", 6.0, 1.5},
      {"gcs_total", 15.0, 3.5},
      {"gcs_verbal_response", 5.0, 1.5},
      {"glucose", 128.0, 50.0},
      {"heart_rate", 86.0, 18.0},
      {"height", 170.0, 10.0},
      {"mean_blood_pressure", 77.0, 15.0},
      {"oxygen_saturation", 98.0, 4.0},
      {"respiratory_rate", 19.0, 6.0},
      {"systolic_blood_pressure", 118.0, 22.0},
      {"temperature", 36.6, 0.8},
      {"weight", 81.0, 20.0},
      {"ph", 7.4, 0.08},
  }};
  return kVars;
}

ClinicalTimeSeries ImputeTimeseries(const RawSeries& raw, int hours) {
  Check(hours > 0, ErrorKind::kConfig, "time-series grid needs a positive length");
  Check(raw.hours.size() == raw.values.size(), ErrorKind::kContract, "ragged raw series");
  const std::size_t T = static_cast<std::size_t>(hours), F = kNumVariables;
  std::vector<std::optional<double>> grid(T * F);
  std::vector<std::size_t> order(raw.hours.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw.hours[a] < raw.hours[b]; });
  bool any = false;
  for (std::size_t i : order) {
    const double h = raw.hours[i];
    if (h < 0 || h >= static_cast<double>(T)) continue;
    const std::size_t t = static_cast<std::size_t>(h);
    for (std::size_t f = 0; f < F; ++f) {
      if (raw.values[i][f]) {
        grid[t * F + f] = raw.values[i][f];
        any = true;
      }
    }
  }
  Check(any, ErrorKind::kData, fmt::format("hadm {}: no time-series observations in the first {} hours", raw.hadm_id, hours));
  ClinicalTimeSeries out;
  out.hadm_id = raw.hadm_id;
  out.values = nd::Tensor(nd::Shape{T, F});
  out.mask.assign(T * F, 0);
  for (std::size_t f = 0; f < F; ++f) {
    double last = Variables()[f].normal;
    for (std::size_t t = 0; t < T; ++t) {
      if (const auto& v = grid[t * F + f]) {
        last = *v;
        out.mask[t * F + f] = 1;
      }
      out.values.at(t, f) = last;
    }
  }
  return out;
}

nd::Tensor CtsFeatures(const ClinicalTimeSeries& series) {
  const std::size_t T = series.hours(), F = kNumVariables;
  nd::Tensor x(nd::Shape{T, 2 * F});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const auto& spec = Variables()[f];
      x.at(t, f) = (series.values.at(t, f) - spec.normal) / spec.scale;
      x.at(t, F + f) = series.mask[t * F + f];
    }
  }
  return x;
}

bool LabelMortality(const Admission& a) { return a.death_time && *a.death_time <= a.discharge_time; }

std::string_view ExclusionName(Exclusion e) {
  switch (e) {
    case Exclusion::kNone: return "included";
    case Exclusion::kMinor: return "age_le_18";
    case Exclusion::kMultipleIcuStays: return "multiple_icu_stays";
    case Exclusion::kTransfer: return "icu_transfer";
    case Exclusion::kEarlyDeath: return "death_within_72h";
    case Exclusion::kNoNotes: return "no_notes_in_window";
  }
  return "unknown";
}

CohortResult SelectCohort(std::span<const Admission> admissions, std::span<const IcuStay> icustays,
                          const NoteTimes& note_times, int window_hours) {
  Check(window_hours > 0, ErrorKind::kConfig, "window must be positive");
  std::map<std::int64_t, const Admission*> by_hadm;
  for (const Admission& a : admissions) {
    Check(by_hadm.emplace(a.hadm_id, &a).second, ErrorKind::kData,
          fmt::format("duplicate admission hadm_id {}", a.hadm_id));
  }
  std::map<std::int64_t, std::vector<const IcuStay*>> stays;
  for (const IcuStay& s : icustays) {
    Check(by_hadm.contains(s.hadm_id), ErrorKind::kData,
          fmt::format("icustay {} refers to unknown hadm_id {}", s.icustay_id, s.hadm_id));
    stays[s.hadm_id].push_back(&s);
  }
  CohortResult out;
  for (const auto& [hadm, list] : stays) {
    const Admission& a = *by_hadm.at(hadm);
    const IcuStay& s = *list.front();
    Exclusion why = Exclusion::kNone;
    const std::set<std::string> units(s.careunits.begin(), s.careunits.end());
    if (a.age <= kMinimumAge) {
      why = Exclusion::kMinor;
    } else if (list.size() > 1) {
      why = Exclusion::kMultipleIcuStays;
    } else if (units.size() > 1) {
      why = Exclusion::kTransfer;
    } else if (a.death_time && a.death_time->HoursSince(s.intime) < kEarlyDeathHours) {
      why = Exclusion::kEarlyDeath;
    } else {
      why = Exclusion::kNoNotes;
      const Timestamp end = s.intime.PlusHours(window_hours);
      if (auto it = note_times.find(hadm); it != note_times.end()) {
        for (Timestamp t : it->second) {
          if (t >= s.intime && t < end) {
            why = Exclusion::kNone;
            break;
          }
        }
      }
    }
    if (why == Exclusion::kNone) {
      out.included.push_back({hadm, a.subject_id, s.intime, LabelMortality(a)});
    } else {
      ++out.excluded[why];
    }
  }
  return out;
}

std::string_view RoleName(Role r) {
  switch (r) {
    case Role::kTrain: return "train";
    case Role::kVal: return "val";
    case Role::kTest: return "test";
  }
  return "unknown";
}

std::vector<std::int64_t> FoldSplit::Members(Role r) const {
  std::vector<std::int64_t> out;
  for (const auto& [hadm, role] : roles) {
    if (role == r) out.push_back(hadm);
  }
  return out;
}

std::vector<FoldSplit> GroupedKFold(std::span<const CohortEntry> cohort, int k, std::uint64_t seed) {
  Check(k >= 3, ErrorKind::kConfig, "grouped k-fold needs k >= 3");
  std::set<std::int64_t> subject_set;
  for (const auto& e : cohort) subject_set.insert(e.subject_id);
  std::vector<std::int64_t> subjects(subject_set.begin(), subject_set.end());
  Check(subjects.size() >= static_cast<std::size_t>(k), ErrorKind::kData,
        fmt::format("{} subjects cannot fill {} folds", subjects.size(), k));
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  std::map<std::int64_t, int> bucket;
  for (std::size_t i = 0; i < subjects.size(); ++i) bucket[subjects[i]] = static_cast<int>(i % k);
  std::vector<FoldSplit> folds(k);
  for (int i = 0; i < k; ++i) {
    folds[i].fold = i;
    for (const auto& e : cohort) {
      const int b = bucket.at(e.subject_id);
      folds[i].roles[e.hadm_id] = b == i ? Role::kTest : b == (i + 1) % k ? Role::kVal : Role::kTrain;
    }
  }
  return folds;
}

std::size_t CountRoleLeaks(const FoldSplit& split, std::span<const CohortEntry> cohort) {
  std::map<std::int64_t, std::set<Role>> seen;
  for (const auto& e : cohort) {
    auto it = split.roles.find(e.hadm_id);
    if (it != split.roles.end()) seen[e.subject_id].insert(it->second);
  }
  std::size_t leaks = 0;
  for (const auto& e : cohort) {
    if (seen[e.subject_id].size() > 1) ++leaks;
  }
  return leaks;
}

ClassWeights ComputeClassWeights(std::span<const std::uint8_t> labels) {
  std::size_t pos = 0;
  for (auto y : labels) pos += y != 0;
  const std::size_t n = labels.size(), neg = n - pos;
  Check(pos > 0 && neg > 0, ErrorKind::kData, "class weights need both classes in the training labels");
  const double nn = static_cast<double>(n);
  return {nn / (2.0 * static_cast<double>(neg)), nn / (2.0 * static_cast<double>(pos))};
}

std::vector<Admission> ReadAdmissions(std::istream& in, const std::string& source) {
  const CsvTable t = CsvTable::Read(in, source);
  const std::size_t c_hadm = t.Column("hadm_id"), c_subject = t.Column("subject_id"),
                    c_admit = t.Column("admittime"), c_disch = t.Column("dischtime"),
                    c_death = t.Column("deathtime"), c_age = t.Column("age");
  std::vector<Admission> out;
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    const auto& row = t.row(r);
    const std::string where = fmt::format("{} row {}", source, r + 2);
    Admission a;
    a.hadm_id = ParseInt(row[c_hadm], where);
    a.subject_id = ParseInt(row[c_subject], where);
    a.admit_time = ParseTime(row[c_admit], where);
    a.discharge_time = ParseTime(row[c_disch], where);
    if (!row[c_death].empty()) a.death_time = ParseTime(row[c_death], where);
    a.age = ParseDouble(row[c_age], where);
    Check(a.admit_time < a.discharge_time, ErrorKind::kData, where + ": admittime must precede dischtime");
    out.push_back(a);
  }
  return out;
}

std::vector<IcuStay> ReadIcuStays(std::istream& in, const std::string& source) {
  const CsvTable t = CsvTable::Read(in, source);
  const std::size_t c_hadm = t.Column("hadm_id"), c_icu = t.Column("icustay_id"), c_in = t.Column("intime"),
                    c_out = t.Column("outtime"), c_units = t.Column("careunits");
  std::vector<IcuStay> out;
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    const auto& row = t.row(r);
    const std::string where = fmt::format("{} row {}", source, r + 2);
    IcuStay s;
    s.hadm_id = ParseInt(row[c_hadm], where);
    s.icustay_id = ParseInt(row[c_icu], where);
    s.intime = ParseTime(row[c_in], where);
    s.outtime = ParseTime(row[c_out], where);
    s.careunits = SplitUnits(row[c_units]);
    Check(s.intime < s.outtime, ErrorKind::kData, where + ": intime must precede outtime");
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::int64_t, RawSeries> ReadTimeseries(std::istream& in, const std::string& source) {
  const CsvTable t = CsvTable::Read(in, source);
  const std::size_t c_hadm = t.Column("hadm_id"), c_hour = t.Column("hour");
  std::array<std::size_t, kNumVariables> cols{};
  for (std::size_t f = 0; f < kNumVariables; ++f) cols[f] = t.Column(Variables()[f].name);
  std::map<std::int64_t, RawSeries> out;
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    const auto& row = t.row(r);
    const std::string where = fmt::format("{} row {}", source, r + 2);
    const std::int64_t hadm = ParseInt(row[c_hadm], where);
    RawSeries& s = out[hadm];
    s.hadm_id = hadm;
    s.hours.push_back(ParseDouble(row[c_hour], where));
    auto& v = s.values.emplace_back();
    for (std::size_t f = 0; f < kNumVariables; ++f) {
      if (!row[cols[f]].empty()) v[f] = ParseDouble(row[cols[f]], where);
    }
  }
  return out;
}

std::vector<Admission> ReadAdmissionsFile(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  return ReadAdmissions(in, path.string());
}

std::vector<IcuStay> ReadIcuStaysFile(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  return ReadIcuStays(in, path.string());
}

std::map<std::int64_t, RawSeries> ReadTimeseriesFile(const std::filesystem::path& path) {
  auto in = OpenInput(path);
  return ReadTimeseries(in, path.string());
}

void WriteAdmissions(std::ostream& out, std::span<const Admission> rows) {
  CsvWriter w(out);
  w.WriteRow({"hadm_id", "subject_id", "admittime", "dischtime", "deathtime", "age"});
  for (const auto& a : rows) {
    w.WriteRow({std::to_string(a.hadm_id), std::to_string(a.subject_id), a.admit_time.ToString(),
                a.discharge_time.ToString(), a.death_time ? a.death_time->ToString() : "", fmt::format("{}", a.age)});
  }
}

void WriteIcuStays(std::ostream& out, std::span<const IcuStay> rows) {
  CsvWriter w(out);
  w.WriteRow({"hadm_id", "icustay_id", "intime", "outtime", "careunits"});
  for (const auto& s : rows) {
    w.WriteRow({std::to_string(s.hadm_id), std::to_string(s.icustay_id), s.intime.ToString(), s.outtime.ToString(),
                fmt::format("{}", fmt::join(s.careunits, "|"))});
  }
}

void WriteTimeseries(std::ostream& out, std::span<const RawSeries> series) {
  CsvWriter w(out);
  std::vector<std::string> header = {"hadm_id", "hour"};
  for (const auto& v : Variables()) header.emplace_back(v.name);
  w.WriteRow(header);
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.hours.size(); ++i) {
      std::vector<std::string> row = {std::to_string(s.hadm_id), fmt::format("{}", s.hours[i])};
      for (const auto& v : s.values[i]) row.push_back(v ? fmt::format("{}", *v) : "");
      w.WriteRow(row);
    }
  }
}

}  // namespace hcr::cohort
