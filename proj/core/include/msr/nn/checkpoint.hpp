#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "msr/nn/tensor.hpp"

namespace msr::nn {

// Checkpoint container, format "msr-checkpoint" v1:
//
//   bytes 0..7   magic "MSRCKPT\n"
//   bytes 8..15  little-endian u64: header length in bytes
//   header       UTF-8 JSON: format_version, meta (free-form hyperparameters),
//                tensors: [{name, shape, dtype, trainable}, ...]
//   payload      raw little-endian float32 tensor data, in header order
//
// Load followed by save reproduces the file byte for byte.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = false;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  nlohmann::ordered_json meta;  // model hyperparameters, stem ids, etc.
  std::vector<NamedTensor> tensors;

  void add(std::string name, Tensor t, bool trainable = false);
  bool has(const std::string& name) const;
  const NamedTensor& get(const std::string& name) const;
  NamedTensor& get(const std::string& name);
  uint64_t payload_checksum() const;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

}  // namespace msr::nn
