#ifndef HCR_COMMON_TIMESTAMP_H_
#define HCR_COMMON_TIMESTAMP_H_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hcr {

// Proleptic Gregorian calendar date.
struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const CivilDate&) const = default;
};

// Seconds since 1970-01-01T00:00:00, no time zone.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t seconds) : seconds_(seconds) {}

  static Timestamp FromCivil(const CivilDate& date, int seconds_of_day = 0);

  // Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" or "YYYY-MM-DDTHH:MM[:SS]".
  static std::optional<Timestamp> Parse(std::string_view text);

  constexpr std::int64_t seconds() const { return seconds_; }
  CivilDate date() const;
  int seconds_of_day() const;

  // "YYYY-MM-DD HH:MM:SS"
  std::string ToString() const;

  constexpr Timestamp PlusHours(double hours) const {
    return Timestamp(seconds_ + static_cast<std::int64_t>(hours * 3600.0));
  }
  constexpr double HoursSince(Timestamp origin) const {
    return static_cast<double>(seconds_ - origin.seconds_) / 3600.0;
  }

  auto operator<=>(const Timestamp&) const = default;

 private:
  std::int64_t seconds_ = 0;
};

std::optional<CivilDate> ParseDate(std::string_view text);
// "HH:MM[:SS]" to seconds of day.
std::optional<int> ParseTimeOfDay(std::string_view text);
std::string FormatDate(const CivilDate& date);
std::string FormatTimeOfDay(int seconds_of_day);

}  // namespace hcr

#endif  // HCR_COMMON_TIMESTAMP_H_
