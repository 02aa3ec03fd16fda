#include "hcr/common/csv.h"

#include <fstream>

#include "hcr/common/error.h"

namespace hcr {
namespace {

// Reads one logical record. Returns false at end of input.
bool ReadRecord(std::istream& in, std::vector<std::string>& fields, std::size_t& line,
                const std::string& source) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const std::size_t start_line = line;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      // tolerated before '\n'
    } else if (ch == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes) {
    Fail(ErrorKind::kData,
         source + ": unterminated quoted field starting at line " + std::to_string(start_line));
  }
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

CsvTable CsvTable::Read(std::istream& in, const std::string& source_name) {
  CsvTable table;
  table.source_ = source_name;
  std::size_t line = 1;
  if (!ReadRecord(in, table.header_, line, source_name)) {
    Fail(ErrorKind::kData, source_name + ": missing header row");
  }
  for (std::size_t i = 0; i < table.header_.size(); ++i) {
    table.index_.emplace(table.header_[i], i);
  }
  std::vector<std::string> fields;
  while (true) {
    const std::size_t record_line = line;
    if (!ReadRecord(in, fields, line, source_name)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != table.header_.size()) {
      Fail(ErrorKind::kData, source_name + ":" + std::to_string(record_line) + ": expected " +
                                 std::to_string(table.header_.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    table.rows_.push_back(fields);
  }
  return table;
}

CsvTable CsvTable::ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kMissingArtifact, "cannot open " + path.string());
  return Read(in, path.string());
}

std::size_t CsvTable::Column(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    Fail(ErrorKind::kData, source_ + ": missing column '" + std::string(name) + "'");
  }
  return it->second;
}

bool CsvTable::HasColumn(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

std::string CsvQuote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void CsvWriter::WriteRow(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << CsvQuote(fields[i]);
  }
  out_ << '\n';
}

}  // namespace hcr
