#include "hcr/common/timestamp.h"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

namespace hcr {
namespace {

bool ParseInt(std::string_view text, int& out) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

Timestamp Timestamp::FromCivil(const CivilDate& date, int seconds_of_day) {
  using namespace std::chrono;
  const sys_days days{year{date.year} / month{static_cast<unsigned>(date.month)} /
                      day{static_cast<unsigned>(date.day)}};
  return Timestamp(static_cast<std::int64_t>(days.time_since_epoch().count()) * 86400 +
                   seconds_of_day);
}

CivilDate Timestamp::date() const {
  using namespace std::chrono;
  std::int64_t days = seconds_ / 86400;
  if (seconds_ % 86400 < 0) --days;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return CivilDate{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
                   static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

int Timestamp::seconds_of_day() const {
  std::int64_t r = seconds_ % 86400;
  if (r < 0) r += 86400;
  return static_cast<int>(r);
}

std::string Timestamp::ToString() const {
  return FormatDate(date()) + " " + FormatTimeOfDay(seconds_of_day());
}

std::optional<Timestamp> Timestamp::Parse(std::string_view text) {
  text = Trim(text);
  if (text.size() < 8) return std::nullopt;
  const auto sep = text.find_first_of(" T");
  const auto date = ParseDate(text.substr(0, sep));
  if (!date) return std::nullopt;
  int tod = 0;
  if (sep != std::string_view::npos) {
    const auto t = ParseTimeOfDay(text.substr(sep + 1));
    if (!t) return std::nullopt;
    tod = *t;
  }
  return FromCivil(*date, tod);
}

std::optional<CivilDate> ParseDate(std::string_view text) {
  text = Trim(text);
  const auto d1 = text.find('-');
  if (d1 == std::string_view::npos) return std::nullopt;
  const auto d2 = text.find('-', d1 + 1);
  if (d2 == std::string_view::npos) return std::nullopt;
  CivilDate date;
  if (!ParseInt(text.substr(0, d1), date.year) ||
      !ParseInt(text.substr(d1 + 1, d2 - d1 - 1), date.month) ||
      !ParseInt(text.substr(d2 + 1), date.day)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{date.year},
                                        std::chrono::month{static_cast<unsigned>(date.month)},
                                        std::chrono::day{static_cast<unsigned>(date.day)}};
  if (!ymd.ok()) return std::nullopt;
  return date;
}

std::optional<int> ParseTimeOfDay(std::string_view text) {
  text = Trim(text);
  int h = 0, m = 0, s = 0;
  const auto c1 = text.find(':');
  if (c1 == std::string_view::npos) return std::nullopt;
  const auto c2 = text.find(':', c1 + 1);
  if (!ParseInt(text.substr(0, c1), h)) return std::nullopt;
  if (c2 == std::string_view::npos) {
    if (!ParseInt(text.substr(c1 + 1), m)) return std::nullopt;
  } else {
    if (!ParseInt(text.substr(c1 + 1, c2 - c1 - 1), m) || !ParseInt(text.substr(c2 + 1), s)) {
      return std::nullopt;
    }
  }
  if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59) return std::nullopt;
  return h * 3600 + m * 60 + s;
}

std::string FormatDate(const CivilDate& date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", date.year, date.month, date.day);
}

std::string FormatTimeOfDay(int seconds_of_day) {
  return fmt::format("{:02d}:{:02d}:{:02d}", seconds_of_day / 3600, (seconds_of_day / 60) % 60,
                     seconds_of_day % 60);
}

}  // namespace hcr
