#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "msgaf/encoding.hpp"
#include "msgaf/model.hpp"
#include "msgaf/params.hpp"

namespace msgaf {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Identifies the parameter schema a checkpoint was trained for: the model
/// shape, the target percentile and the metric schema version.
std::uint64_t config_hash(const ModelConfig& model, int percentile);

struct Checkpoint {
  std::uint64_t config_hash = 0;
  ParamSet params;
  Normalizer normalizer;
  double target_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double val_loss = 0.0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Layout, all integers and reals little-endian:
///   "MSGAF" | u32 version | u64 config hash | u32 record count |
///   per record: u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values.
/// Normalizer statistics and run metadata are stored as "normalizer.*" and
/// "meta.*" records after the model tensors.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msgaf
