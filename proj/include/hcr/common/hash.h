#ifndef HCR_COMMON_HASH_H_
#define HCR_COMMON_HASH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace hcr {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view data);
std::string Sha256File(const std::filesystem::path& path);

// First 8 bytes of SHA-256, big-endian.
std::uint64_t Hash64(std::string_view data);

}  // namespace hcr

#endif  // HCR_COMMON_HASH_H_
