#pragma once

#include <optional>
#include <string>

#include "thermodepth/config.hpp"
#include "thermodepth/depthnet.hpp"

namespace thermodepth {

// Binary container, little-endian:
//
//   "TDCK" u32 version
//   u32 len, model config JSON        u32 len, model config hash (hex)
//   u32 n_tensors, then per tensor:
//     u32 len, name  u8 group  u8 trainable  u32 rank  u32 dims[rank]  f32 data[numel]
//   u64 FNV-1a of every preceding byte
//
// Values are the canonical float32 parameters, so save -> load is bitwise.

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path);

/// Verifies, in order: content hash, stored config hash, tensor names
/// (kMissingTensor / kUnexpectedTensor), shapes, and the fixed / trainable
/// census. With `expected`, the stored config must hash equal to it
/// (kConfigHashMismatch).
Checkpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt);

/// Hex FNV-1a of a checkpoint file's bytes.
std::string checkpoint_file_hash(const std::string& path);

/// Hex FNV-1a over names, dims and float bits of a parameter set.
std::string params_hash(const ModelParams& params);

}  // namespace thermodepth
