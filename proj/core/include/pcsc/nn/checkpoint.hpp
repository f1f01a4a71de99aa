#pragma once

#include <string>

#include "pcsc/nn/layers.hpp"

namespace pcsc::nn {

// Little-endian binary tensor container:
//   magic "PCSC", u32 version, u32 tensor count, then per tensor:
//   u32 name length, name bytes, u32 rank, u64 dims, float32 payload
//   in row-major order.
void save_tensors(const std::map<std::string, Matrix>& tensors,
                  const std::string& path);
std::map<std::string, Matrix> load_tensors(const std::string& path);

// Saving truncates values to float32; loading a saved store back yields
// exactly the persisted values, so save -> load is idempotent.
void save_checkpoint(const ParamStore& store, const std::string& path);
// Names and shapes must match the store exactly.
void load_checkpoint(ParamStore& store, const std::string& path);

// FNV-1a hash of a file's bytes, hex-encoded; used for run manifests.
std::string file_hash_hex(const std::string& path);

}  // namespace pcsc::nn
