#ifndef HCR_COMMON_KVCONFIG_H_
#define HCR_COMMON_KVCONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hcr {

// Flat "key = value" text configuration. '#' starts a comment. Typed getters
// mark keys as consumed; RejectUnknown() fails on any key nobody asked for.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(const std::string& text, const std::string& source = "<config>");
  static KeyValueConfig ReadFile(const std::filesystem::path& path);

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const { return values_.count(key) > 0; }

  std::string GetString(const std::string& key, const std::string& fallback);
  std::int64_t GetInt(const std::string& key, std::int64_t fallback);
  double GetDouble(const std::string& key, double fallback);
  bool GetBool(const std::string& key, bool fallback);
  std::vector<std::int64_t> GetIntList(const std::string& key,
                                       const std::vector<std::int64_t>& fallback);

  // Throws a config error listing every key that was never read.
  void RejectUnknown() const;

  // Sorted "key = value" lines; stable input for hashing.
  std::string Canonical() const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  std::optional<std::string> Take(const std::string& key);

  std::string source_ = "<config>";
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace hcr

#endif  // HCR_COMMON_KVCONFIG_H_
