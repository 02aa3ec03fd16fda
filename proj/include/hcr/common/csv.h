#ifndef HCR_COMMON_CSV_H_
#define HCR_COMMON_CSV_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hcr {

// Comma-separated table with a header row. Fields may be double-quoted;
// quoted fields may contain commas, line breaks and doubled quotes.
class CsvTable {
 public:
  static CsvTable Read(std::istream& in, const std::string& source_name = "<stream>");
  static CsvTable ReadFile(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }

  // Column index by name; throws a data error naming the source if absent.
  std::size_t Column(std::string_view name) const;
  bool HasColumn(std::string_view name) const;

  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void WriteRow(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

std::string CsvQuote(std::string_view field);

}  // namespace hcr

#endif  // HCR_COMMON_CSV_H_
