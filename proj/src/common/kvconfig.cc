#include "hcr/common/kvconfig.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hcr/common/error.h"

namespace hcr {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(const std::string& text, const std::string& source) {
  KeyValueConfig config;
  config.source_ = source;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kConfig,
           source + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) {
      Fail(ErrorKind::kConfig, source + ":" + std::to_string(line_no) + ": empty key");
    }
    if (config.values_.count(key)) {
      Fail(ErrorKind::kConfig, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kConfig, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str(), path.string());
}

void KeyValueConfig::Set(const std::string& key, const std::string& value) { values_[key] = value; }

std::optional<std::string> KeyValueConfig::Take(const std::string& key) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::GetString(const std::string& key, const std::string& fallback) {
  return Take(key).value_or(fallback);
}

std::int64_t KeyValueConfig::GetInt(const std::string& key, std::int64_t fallback) {
  const auto v = Take(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const char* end = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end) {
    Fail(ErrorKind::kConfig, source_ + ": key '" + key + "' expects an integer, got '" + *v + "'");
  }
  return out;
}

double KeyValueConfig::GetDouble(const std::string& key, double fallback) {
  const auto v = Take(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return out;
  } catch (const std::exception&) {
    Fail(ErrorKind::kConfig, source_ + ": key '" + key + "' expects a number, got '" + *v + "'");
  }
}

bool KeyValueConfig::GetBool(const std::string& key, bool fallback) {
  const auto v = Take(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  Fail(ErrorKind::kConfig, source_ + ": key '" + key + "' expects true/false, got '" + *v + "'");
}

std::vector<std::int64_t> KeyValueConfig::GetIntList(const std::string& key,
                                                     const std::vector<std::int64_t>& fallback) {
  const auto v = Take(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    std::int64_t x = 0;
    const char* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, x);
    if (ec != std::errc() || ptr != end) {
      Fail(ErrorKind::kConfig,
           source_ + ": key '" + key + "' expects a comma-separated integer list, got '" + *v + "'");
    }
    out.push_back(x);
  }
  return out;
}

void KeyValueConfig::RejectUnknown() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) Fail(ErrorKind::kConfig, source_ + ": unknown key(s): " + unknown);
}

std::string KeyValueConfig::Canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

}  // namespace hcr
