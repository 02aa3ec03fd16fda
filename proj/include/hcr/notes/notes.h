#ifndef HCR_NOTES_NOTES_H_
#define HCR_NOTES_NOTES_H_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcr/common/error.h"
#include "hcr/common/timestamp.h"

namespace hcr::notes {

inline constexpr std::size_t kDefaultNoteLength = 500;
inline constexpr std::int32_t kPadId = 0;

inline constexpr std::string_view kDeidName = "deidentifiedname";
inline constexpr std::string_view kDeidHospital = "deidentifiedhosp";
inline constexpr std::string_view kDeidDate = "deidentifieddate";

struct RawNote {
  std::int64_t row_id = 0;
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  std::string category;
  std::optional<CivilDate> chart_date;
  std::optional<int> chart_time;  // seconds of day
  bool is_error = false;
  std::string text;
};

enum class DeidClass { kName, kHospital, kDate, kOther };

// Content between "[**" and "**]", already lowercased.
DeidClass ClassifyDeidSpan(std::string_view content);

// Lowercase, normalize de-id spans, collapse whitespace. Idempotent.
std::string CleanText(std::string_view text);

// Letters only, letters mixed with digits, or digits whose integer value is
// below 1000 (leading zeros allowed). The only place this rule lives.
bool KeepToken(std::string_view token);

// Splits on anything outside [a-z0-9] and keeps tokens passing KeepToken.
std::vector<std::string> TokenizeFilter(std::string_view cleaned);

template <typename T>
struct Padded {
  std::vector<T> items;
  std::vector<std::uint8_t> mask;

  std::size_t real_length() const {
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    return n;
  }
};

// Keeps the first max_len items and right-pads with pad.
template <typename T>
Padded<T> TruncatePad(std::span<const T> tokens, std::size_t max_len, const T& pad) {
  Check(!tokens.empty(), ErrorKind::kEmptyNote, "TruncatePad: empty token list");
  Check(max_len > 0, ErrorKind::kConfig, "TruncatePad: max_len must be positive");
  Padded<T> out;
  const std::size_t real = std::min(tokens.size(), max_len);
  out.items.assign(tokens.begin(), tokens.begin() + real);
  out.items.resize(max_len, pad);
  out.mask.assign(max_len, 0);
  std::fill(out.mask.begin(), out.mask.begin() + real, 1);
  return out;
}

// Chart time if present, otherwise midnight of the chart date.
Timestamp ImputeChartTime(const RawNote& note);

bool IsDischargeSummary(std::string_view category);

struct FilteredCorpus {
  std::vector<RawNote> embedding;  // errors and duplicates removed
  std::vector<RawNote> model;      // additionally without discharge summaries
};

// Duplicates share (hadm_id, imputed chart time, exact text); the lowest
// row_id survives. Output keeps input order.
FilteredCorpus DedupeAndFilter(std::span<const RawNote> notes);

struct CleanNote {
  std::int64_t row_id = 0;
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  std::string category;
  Timestamp charted_at;
  std::vector<std::int32_t> tokens;  // fixed length, PAD after the real prefix
  std::vector<std::uint8_t> mask;

  std::size_t real_length() const;
};

struct PatientFile {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  std::vector<CleanNote> notes;
  bool label = false;
  int window_hours = 0;
};

// Notes charted in [intime, intime + W h), sorted by time then row_id.
// None when nothing falls inside the window.
std::optional<PatientFile> AssemblePatientFile(std::span<const CleanNote> notes, Timestamp icu_intime,
                                               int window_hours, bool label);

// notes.csv: row_id, subject_id, hadm_id, category, chartdate, charttime,
// iserror, text. charttime may be empty, "HH:MM[:SS]" or a full timestamp.
std::vector<RawNote> ReadNotesCsv(std::istream& in, const std::string& source = "<stream>");
std::vector<RawNote> ReadNotesCsv(const std::filesystem::path& path);
void WriteNotesCsv(std::ostream& out, std::span<const RawNote> notes);

// One JSON object per line holding the unpadded real prefix of token ids.
void WriteCleanNotes(std::ostream& out, std::span<const CleanNote> notes);
std::vector<CleanNote> ReadCleanNotes(std::istream& in, std::size_t note_length,
                                      const std::string& source = "<stream>");

}  // namespace hcr::notes

#endif  // HCR_NOTES_NOTES_H_
