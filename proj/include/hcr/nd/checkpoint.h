#ifndef HCR_ND_CHECKPOINT_H_
#define HCR_ND_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hcr/nd/params.h"

namespace hcr::nd {

// Checkpoint container, all integers little-endian:
//
//   magic        8 bytes  "HCRCKPT\0"
//   version      u32      kCheckpointVersion
//   config_hash  u64
//   count        u32
//   count x entry:
//     name_len   u32, name bytes (no terminator)
//     flags      u8       bit 0 = trainable
//     rank       u32, rank x u64 extents
//     values     prod(extents) x IEEE-754 binary64, little-endian
//
// Values round-trip bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  bool trainable = true;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::vector<CheckpointEntry> entries;
};

void WriteCheckpoint(std::ostream& out, const ParamStore& params, std::uint64_t config_hash);
Checkpoint ReadCheckpoint(std::istream& in);

void SaveCheckpoint(const std::filesystem::path& path, const ParamStore& params,
                    std::uint64_t config_hash);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Copies checkpoint values into a store of identical layout. Fails on a
// config hash mismatch, a missing or extra entry, or a shape mismatch.
void RestoreParams(const Checkpoint& checkpoint, ParamStore& params, std::uint64_t expected_hash);

}  // namespace hcr::nd

#endif  // HCR_ND_CHECKPOINT_H_
