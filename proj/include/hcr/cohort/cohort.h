#ifndef HCR_COHORT_COHORT_H_
#define HCR_COHORT_COHORT_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hcr/common/timestamp.h"
#include "hcr/nd/tensor.h"

namespace hcr::cohort {

struct Admission {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  Timestamp admit_time;
  Timestamp discharge_time;
  std::optional<Timestamp> death_time;
  double age = 0.0;  // years at admission
};

struct IcuStay {
  std::int64_t hadm_id = 0;
  std::int64_t icustay_id = 0;
  Timestamp intime;
  Timestamp outtime;
  std::vector<std::string> careunits;  // in transfer order
};

inline constexpr std::size_t kNumVariables = 17;

struct VariableSpec {
  std::string_view name;
  double normal;  // fills gaps before the first observation
  double scale;   // feature = (value - normal) / scale
};

const std::array<VariableSpec, kNumVariables>& Variables();

// Observations for one stay; hour counts from ICU intime.
struct RawSeries {
  std::int64_t hadm_id = 0;
  std::vector<double> hours;
  std::vector<std::array<std::optional<double>, kNumVariables>> values;
};

struct ClinicalTimeSeries {
  std::int64_t hadm_id = 0;
  nd::Tensor values;               // [T, F] imputed, original units
  std::vector<std::uint8_t> mask;  // T*F, 1 where observed

  std::size_t hours() const { return values.dim(0); }
};

// Hourly grid over [0, hours). The last observation within an hour wins;
// gaps are forward-filled, leading gaps take the normal value.
ClinicalTimeSeries ImputeTimeseries(const RawSeries& raw, int hours);

// [T, 2F]: standardized values followed by the mask channels.
nd::Tensor CtsFeatures(const ClinicalTimeSeries& series);

// True iff death occurred at or before discharge.
bool LabelMortality(const Admission& admission);

enum class Exclusion { kNone, kMinor, kMultipleIcuStays, kTransfer, kEarlyDeath, kNoNotes };
std::string_view ExclusionName(Exclusion e);

struct CohortEntry {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  Timestamp intime;
  bool label = false;
};

struct CohortResult {
  std::vector<CohortEntry> included;  // ascending hadm_id
  std::map<Exclusion, std::size_t> excluded;
};

// Chart times of usable model-corpus notes per hospital stay.
using NoteTimes = std::unordered_map<std::int64_t, std::vector<Timestamp>>;

inline constexpr double kEarlyDeathHours = 72.0;
inline constexpr double kMinimumAge = 18.0;

CohortResult SelectCohort(std::span<const Admission> admissions, std::span<const IcuStay> icustays,
                          const NoteTimes& note_times, int window_hours);

enum class Role : std::uint8_t { kTrain, kVal, kTest };
std::string_view RoleName(Role r);

struct FoldSplit {
  int fold = 0;
  std::map<std::int64_t, Role> roles;  // hadm_id -> role

  std::vector<std::int64_t> Members(Role r) const;
};

// Subjects are sorted, shuffled by seed and dealt round-robin into k buckets.
// Fold i tests on bucket i, validates on bucket i+1 and trains on the rest.
std::vector<FoldSplit> GroupedKFold(std::span<const CohortEntry> cohort, int k, std::uint64_t seed);

// Pairs (subject, hadm) whose subject also holds another role in the fold.
std::size_t CountRoleLeaks(const FoldSplit& split, std::span<const CohortEntry> cohort);

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

// w_c = N / (2 N_c). Both classes must be present.
ClassWeights ComputeClassWeights(std::span<const std::uint8_t> labels);

// Table IO. Times are "YYYY-MM-DD HH:MM:SS"; empty deathtime means none.
// careunits are joined with '|'.
std::vector<Admission> ReadAdmissions(std::istream& in, const std::string& source = "<stream>");
std::vector<IcuStay> ReadIcuStays(std::istream& in, const std::string& source = "<stream>");
// timeseries.csv: hadm_id, hour, then one column per variable; empty = missing.
std::map<std::int64_t, RawSeries> ReadTimeseries(std::istream& in, const std::string& source = "<stream>");

void WriteAdmissions(std::ostream& out, std::span<const Admission> rows);
void WriteIcuStays(std::ostream& out, std::span<const IcuStay> rows);
void WriteTimeseries(std::ostream& out, std::span<const RawSeries> series);

std::vector<Admission> ReadAdmissionsFile(const std::filesystem::path& path);
std::vector<IcuStay> ReadIcuStaysFile(const std::filesystem::path& path);
std::map<std::int64_t, RawSeries> ReadTimeseriesFile(const std::filesystem::path& path);

}  // namespace hcr::cohort

#endif  // HCR_COHORT_COHORT_H_
