#pragma once

#include <stdexcept>
#include <string>

#include "gft/model.hpp"

namespace gft {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Bad magic bytes or unsupported format version.
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
/// File ends mid-record or tensors are missing.
struct CheckpointTruncatedError : CheckpointError {
  using CheckpointError::CheckpointError;
};
/// Stored tensor does not match the model built from the embedded config
/// (unknown name, duplicate, or dimension mismatch).
struct CheckpointShapeError : CheckpointError {
  using CheckpointError::CheckpointError;
};

/// Binary model snapshot. Layout: magic "GFTC", format version u32, config
/// JSON (u64 length + UTF-8 bytes), then one record per parameter: name
/// (u64 length + UTF-8 bytes), rank u32, dims as u64, payload as
/// little-endian float32. All integers little-endian. Training math is
/// float64; storing float32 loses precision once, after which
/// save -> load -> save is byte-stable.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// config_json must embed the ModelConfig fields (see checkpoint.cpp) and may
/// carry extra run metadata; it is stored verbatim.
void save_checkpoint(const TransformerModel& model, const std::string& config_json,
                     const std::string& path);

struct LoadedCheckpoint {
  TransformerModel model;
  std::string config_json;  // exact stored blob
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// The ModelConfig <-> JSON mapping shared by checkpoints and run configs.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace gft
