#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvm/engine.hpp"
#include "pvm/errors.hpp"

namespace pvm {

// File layout, all integers and doubles little-endian:
//   "PVMS" | u32 version | u64 payload bytes | payload | u32 crc32(payload)
// The payload holds the model config, learning config, topology, per-unit
// weights, per-unit states, frame counter and mode.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelState& model);
ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace pvm
