#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>

#include "nsr/model/config.hpp"
#include "nsr/model/tape.hpp"
#include "nsr/model/train.hpp"

namespace nsr::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParameterSet<float> params;
  std::optional<AdamState<float>> adam;
  nlohmann::json metadata;  // free-form: training step, seeds, ...
};

/// Binary layout, little-endian: 8-byte magic "NSRCKPT\0", u32 version,
/// u64 header length + JSON header {"config":..., "metadata":...}, u32 array
/// count, then per array u32 name length, name, u32 rows, u32 cols, float32
/// data; then u8 Adam flag and, if set, i64 step and the m and v arrays in
/// parameter order.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CorruptCheckpoint on bad magic, truncation or inconsistent arrays;
/// VersionMismatch on an unknown version or a config whose input width differs
/// from `expected_input_dim`.
Checkpoint load_checkpoint(std::istream& in, int expected_input_dim = 64);
Checkpoint load_checkpoint(const std::filesystem::path& path, int expected_input_dim = 64);

}  // namespace nsr::model
