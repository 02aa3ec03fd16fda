#include "hcr/notes/notes.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <tuple>

#include <fmt/format.h>
#include "json.hpp"

#include "hcr/common/csv.h"

namespace hcr::notes {
namespace {

constexpr std::string_view kOpen = "[**";
constexpr std::string_view kClose = "**]";

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool IsLower(char c) { return c >= 'a' && c <= 'z'; }
bool IsDigit(char c) { return c >= '0' && c <= '9'; }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

std::int64_t ParseInt(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kData, fmt::format("{}: not an integer: '{}'", what, s));
}

}  // namespace

DeidClass ClassifyDeidSpan(std::string_view content) {
  static const std::regex kDatePattern(R"(^\d{1,4}([-/]\d{1,4}){1,2}$|^\d{4}$)");
  const std::string c(Trim(content));
  if (c.find("name") != std::string::npos) return DeidClass::kName;
  if (c.find("hospital") != std::string::npos) return DeidClass::kHospital;
  if (std::regex_match(c, kDatePattern)) return DeidClass::kDate;
  for (std::string_view key : {"date", "month", "year", "holiday"}) {
    if (c.find(key) != std::string::npos) return DeidClass::kDate;
  }
  return DeidClass::kOther;
}

std::string CleanText(std::string_view text) {
  std::string lower(text);
  for (char& ch : lower) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  std::string_view s = lower;
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.substr(i, 3) == kOpen) {
      const std::size_t close = s.find(kClose, i + 3);
      if (close == std::string_view::npos) {
        out += ' ';
        i += 3;
        continue;
      }
      switch (ClassifyDeidSpan(s.substr(i + 3, close - i - 3))) {
        case DeidClass::kName: out += fmt::format(" {} ", kDeidName); break;
        case DeidClass::kHospital: out += fmt::format(" {} ", kDeidHospital); break;
        case DeidClass::kDate: out += fmt::format(" {} ", kDeidDate); break;
        case DeidClass::kOther: out += ' '; break;
      }
      i = close + 3;
    } else if (s.substr(i, 3) == kClose) {
      out += ' ';
      i += 3;
    } else {
      out += s[i++];
    }
  }
  std::string collapsed;
  collapsed.reserve(out.size());
  bool pending_space = false;
  for (char ch : out) {
    if (IsSpace(ch)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !collapsed.empty()) collapsed += ' ';
    pending_space = false;
    collapsed += ch;
  }
  return collapsed;
}

bool KeepToken(std::string_view token) {
  if (token.empty()) return false;
  bool letters = false;
  for (char c : token) {
    if (IsLower(c)) {
      letters = true;
    } else if (!IsDigit(c)) {
      return false;
    }
  }
  if (letters) return true;
  const std::size_t first = token.find_first_not_of('0');
  return first == std::string_view::npos || token.size() - first <= 3;
}

std::vector<std::string> TokenizeFilter(std::string_view cleaned) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && !IsLower(cleaned[i]) && !IsDigit(cleaned[i])) ++i;
    std::size_t j = i;
    while (j < cleaned.size() && (IsLower(cleaned[j]) || IsDigit(cleaned[j]))) ++j;
    const std::string_view token = cleaned.substr(i, j - i);
    if (KeepToken(token)) tokens.emplace_back(token);
    i = j;
  }
  return tokens;
}

Timestamp ImputeChartTime(const RawNote& note) {
  Check(note.chart_date.has_value(), ErrorKind::kData,
        fmt::format("note row_id {} has no chart date", note.row_id));
  return Timestamp::FromCivil(*note.chart_date, note.chart_time.value_or(0));
}

bool IsDischargeSummary(std::string_view category) {
  const std::string_view c = Trim(category);
  constexpr std::string_view kTarget = "discharge summary";
  if (c.size() != kTarget.size()) return false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(c[i])) != kTarget[i]) return false;
  }
  return true;
}

FilteredCorpus DedupeAndFilter(std::span<const RawNote> notes) {
  using Key = std::tuple<std::int64_t, std::int64_t, std::string_view>;
  std::map<Key, std::int64_t> keeper;
  for (const RawNote& n : notes) {
    if (n.is_error) continue;
    const Key key{n.hadm_id, ImputeChartTime(n).seconds(), n.text};
    auto [it, inserted] = keeper.emplace(key, n.row_id);
    if (!inserted) it->second = std::min(it->second, n.row_id);
  }
  FilteredCorpus out;
  for (const RawNote& n : notes) {
    if (n.is_error) continue;
    if (keeper.at(Key{n.hadm_id, ImputeChartTime(n).seconds(), n.text}) != n.row_id) continue;
    out.embedding.push_back(n);
    if (!IsDischargeSummary(n.category)) out.model.push_back(n);
  }
  return out;
}

std::size_t CleanNote::real_length() const {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  return n;
}

std::optional<PatientFile> AssemblePatientFile(std::span<const CleanNote> notes, Timestamp icu_intime,
                                               int window_hours, bool label) {
  Check(window_hours > 0, ErrorKind::kConfig, "window must be positive");
  const Timestamp end = icu_intime.PlusHours(window_hours);
  PatientFile file;
  file.label = label;
  file.window_hours = window_hours;
  for (const CleanNote& n : notes) {
    if (n.charted_at >= icu_intime && n.charted_at < end) file.notes.push_back(n);
  }
  if (file.notes.empty()) return std::nullopt;
  std::sort(file.notes.begin(), file.notes.end(), [](const CleanNote& a, const CleanNote& b) {
    return std::tie(a.charted_at, a.row_id) < std::tie(b.charted_at, b.row_id);
  });
  file.hadm_id = file.notes.front().hadm_id;
  file.subject_id = file.notes.front().subject_id;
  return file;
}

std::vector<RawNote> ReadNotesCsv(std::istream& in, const std::string& source) {
  const CsvTable table = CsvTable::Read(in, source);
  const std::size_t c_row = table.Column("row_id"), c_subject = table.Column("subject_id"),
                    c_hadm = table.Column("hadm_id"), c_category = table.Column("category"),
                    c_date = table.Column("chartdate"), c_time = table.Column("charttime"),
                    c_error = table.Column("iserror"), c_text = table.Column("text");
  std::vector<RawNote> notes;
  notes.reserve(table.num_rows());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    const auto& row = table.row(r);
    const std::string where = fmt::format("{} row {}", source, r + 2);
    RawNote n;
    n.row_id = ParseInt(row[c_row], where + " row_id");
    n.subject_id = ParseInt(row[c_subject], where + " subject_id");
    n.hadm_id = ParseInt(row[c_hadm], where + " hadm_id");
    n.category = row[c_category];
    if (!row[c_date].empty()) {
      n.chart_date = ParseDate(row[c_date]);
      Check(n.chart_date.has_value(), ErrorKind::kData, where + ": bad chartdate '" + row[c_date] + "'");
    }
    const std::string& t = row[c_time];
    if (!t.empty()) {
      if (t.size() > 8) {
        const auto full = Timestamp::Parse(t);
        Check(full.has_value(), ErrorKind::kData, where + ": bad charttime '" + t + "'");
        n.chart_time = full->seconds_of_day();
        if (!n.chart_date) n.chart_date = full->date();
      } else {
        n.chart_time = ParseTimeOfDay(t);
        Check(n.chart_time.has_value(), ErrorKind::kData, where + ": bad charttime '" + t + "'");
      }
    }
    const std::string& e = row[c_error];
    n.is_error = !e.empty() && e != "0";
    n.text = row[c_text];
    notes.push_back(std::move(n));
  }
  return notes;
}

std::vector<RawNote> ReadNotesCsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorKind::kMissingArtifact, "cannot open " + path.string());
  return ReadNotesCsv(in, path.string());
}

void WriteNotesCsv(std::ostream& out, std::span<const RawNote> notes) {
  CsvWriter w(out);
  w.WriteRow({"row_id", "subject_id", "hadm_id", "category", "chartdate", "charttime", "iserror", "text"});
  for (const RawNote& n : notes) {
    w.WriteRow({std::to_string(n.row_id), std::to_string(n.subject_id), std::to_string(n.hadm_id), n.category,
                n.chart_date ? FormatDate(*n.chart_date) : "",
                n.chart_time ? FormatTimeOfDay(*n.chart_time) : "", n.is_error ? "1" : "", n.text});
  }
}

void WriteCleanNotes(std::ostream& out, std::span<const CleanNote> notes) {
  for (const CleanNote& n : notes) {
    nlohmann::json j;
    j["row_id"] = n.row_id;
    j["subject_id"] = n.subject_id;
    j["hadm_id"] = n.hadm_id;
    j["category"] = n.category;
    j["charted_at"] = n.charted_at.ToString();
    j["ids"] = std::vector<std::int32_t>(n.tokens.begin(), n.tokens.begin() + n.real_length());
    out << j.dump() << '\n';
  }
}

std::vector<CleanNote> ReadCleanNotes(std::istream& in, std::size_t note_length, const std::string& source) {
  std::vector<CleanNote> notes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const std::string where = fmt::format("{}:{}", source, line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      CleanNote n;
      n.row_id = j.at("row_id").get<std::int64_t>();
      n.subject_id = j.at("subject_id").get<std::int64_t>();
      n.hadm_id = j.at("hadm_id").get<std::int64_t>();
      n.category = j.at("category").get<std::string>();
      const auto ts = Timestamp::Parse(j.at("charted_at").get<std::string>());
      Check(ts.has_value(), ErrorKind::kData, where + ": bad charted_at");
      n.charted_at = *ts;
      const auto ids = j.at("ids").get<std::vector<std::int32_t>>();
      Check(!ids.empty(), ErrorKind::kEmptyNote, where + ": note without tokens");
      auto padded = TruncatePad<std::int32_t>(ids, note_length, kPadId);
      n.tokens = std::move(padded.items);
      n.mask = std::move(padded.mask);
      notes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kData, where + ": " + e.what());
    }
  }
  return notes;
}

}  // namespace hcr::notes
