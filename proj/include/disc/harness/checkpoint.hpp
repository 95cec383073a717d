#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "disc/disnet/params.hpp"

namespace disc::harness {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Layout, all integers little-endian:
///   "DISC", u16 version,
///   u32 length + model description text,
///   u32 epoch, u64 seed, u64 config digest,
///   u32 tensor count, then per tensor:
///     u32 name length + name, u32 rank, u64 dims..., f32 values.
struct Checkpoint {
  net::NetSpec spec;
  net::ParameterStore<float> params;
  std::uint32_t epoch = 0; ///< completed epochs
  std::uint64_t seed = 0;
  std::uint64_t config_digest = 0;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

std::string encode_checkpoint(const Checkpoint &checkpoint);
/// Verifies the magic, version, and that tensor names and shapes match the
/// stored model description exactly. Throws DataError.
Checkpoint decode_checkpoint(const std::string &bytes);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace disc::harness
