#pragma once

#include "cycflow/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace cycflow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  std::string objective = "flow";  // "flow" or "direct"
  std::int64_t epochs = 0;
  double final_loss = 0.0;
  std::string dataset_fingerprint;
};

struct Checkpoint {
  ModelParams params;
  TrainingMetadata meta;
};

/// Binary layout, all integers and doubles little-endian:
///
///   magic            8 bytes  "CYCFLOW\0"
///   format version   u32
///   dim layers heads ff_mult t_dim   5 x u32
///   seed             u64
///   objective        str   (u32 length + bytes)
///   epochs           i64
///   final_loss       f64
///   fingerprint      str
///   tensor count     u32
///   per tensor:      str name, u32 rows, u32 cols, rows*cols f64 row-major
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cycflow
