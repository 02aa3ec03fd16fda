#include "hcr/nd/checkpoint.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hcr/common/error.h"

namespace hcr::nd {
namespace {

constexpr std::array<char, 8> kMagic = {'H', 'C', 'R', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void PutLe(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T GetLe(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  Check(static_cast<bool>(in), ErrorKind::kData, "checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void WriteCheckpoint(std::ostream& out, const ParamStore& params, std::uint64_t config_hash) {
  out.write(kMagic.data(), kMagic.size());
  PutLe<std::uint32_t>(out, kCheckpointVersion);
  PutLe<std::uint64_t>(out, config_hash);
  PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Param& p : params) {
    PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    PutLe<std::uint8_t>(out, p.trainable ? 1 : 0);
    PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) PutLe<std::uint64_t>(out, d);
    for (double v : p.value.data()) PutLe<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  Check(static_cast<bool>(out), ErrorKind::kData, "checkpoint write failed");
}

Checkpoint ReadCheckpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  Check(static_cast<bool>(in) && magic == kMagic, ErrorKind::kData, "not a checkpoint file (bad magic)");
  Checkpoint ck;
  ck.version = GetLe<std::uint32_t>(in);
  Check(ck.version == kCheckpointVersion, ErrorKind::kData,
        "unsupported checkpoint version " + std::to_string(ck.version));
  ck.config_hash = GetLe<std::uint64_t>(in);
  const auto count = GetLe<std::uint32_t>(in);
  ck.entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    CheckpointEntry entry;
    const auto name_len = GetLe<std::uint32_t>(in);
    Check(name_len < (1u << 16), ErrorKind::kData, "checkpoint entry name too long");
    entry.name.resize(name_len);
    in.read(entry.name.data(), name_len);
    entry.trainable = (GetLe<std::uint8_t>(in) & 1) != 0;
    const auto rank = GetLe<std::uint32_t>(in);
    Check(rank <= 8, ErrorKind::kData, "checkpoint entry rank too large");
    Shape shape(rank);
    for (auto& d : shape) d = GetLe<std::uint64_t>(in);
    std::vector<double> values(NumElements(shape));
    for (double& v : values) v = std::bit_cast<double>(GetLe<std::uint64_t>(in));
    entry.value = Tensor(std::move(shape), std::move(values));
    ck.entries.push_back(std::move(entry));
  }
  return ck;
}

void SaveCheckpoint(const std::filesystem::path& path, const ParamStore& params,
                    std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(static_cast<bool>(out), ErrorKind::kData, "cannot write " + path.string());
  WriteCheckpoint(out, params, config_hash);
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(static_cast<bool>(in), ErrorKind::kMissingArtifact, "cannot open checkpoint " + path.string());
  return ReadCheckpoint(in);
}

void RestoreParams(const Checkpoint& checkpoint, ParamStore& params, std::uint64_t expected_hash) {
  Check(checkpoint.config_hash == expected_hash, ErrorKind::kData,
        "checkpoint was written for a different model configuration");
  Check(checkpoint.entries.size() == params.size(), ErrorKind::kData,
        "checkpoint holds " + std::to_string(checkpoint.entries.size()) + " arrays, model has " +
            std::to_string(params.size()));
  for (const CheckpointEntry& e : checkpoint.entries) {
    Param* p = params.Find(e.name);
    Check(p != nullptr, ErrorKind::kData, "checkpoint array '" + e.name + "' unknown to the model");
    Check(p->value.shape() == e.value.shape(), ErrorKind::kData,
          "checkpoint array '" + e.name + "' has shape " + ShapeString(e.value.shape()) + ", model expects " +
              ShapeString(p->value.shape()));
    p->value = e.value;
  }
}

}  // namespace hcr::nd
