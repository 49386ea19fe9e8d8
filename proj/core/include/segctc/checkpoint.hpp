#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "segctc/data.hpp"
#include "segctc/joint.hpp"
#include "segctc/model.hpp"

namespace segctc {

/// Byte layout, all integers and reals little-endian:
///
///   char[8]  magic "SEGCTCK\x01"
///   u32      format version (1)
///   u32      vocabulary size, then per symbol: u32 length + bytes
///   u32      snapshot length, then the [model]/[train] text snapshot
///   i32      epochs completed
///   i32      learning-rate decays in the current phase
///   u8       has previous validation error, f64 previous error
///   u64      seed (all shuffling and dropout streams derive from it)
///   u32      log records, each: i32 epoch, f64 lr, f64 loss_total,
///            f64 loss_ctc, f64 loss_scrf, f64 valid_per, u8 phase
///   u32      tensor count, each: u32 name length + name, u32 rows,
///            u32 cols, rows*cols f64 in row-major order
///
/// Tensor names follow collect_tensors(ModelParams&). CTC output 0 is the
/// blank; output k is vocabulary symbol k-1.
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'G', 'C', 'T', 'C', 'K', '\x01'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Vocabulary vocab;
  ModelConfig model;
  TrainConfig train;
  TrainState state;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segctc
