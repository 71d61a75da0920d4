#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unimatch/model.hpp"
#include "unimatch/numerics/params.hpp"

namespace unimatch {

/// Parameter snapshot plus the model configuration it belongs to.
///
/// File layout (little endian): magic "UMCKPT\0\0", u32 version, u32 length +
/// model-config text, u64 architecture fingerprint, u32 parameter count, then
/// per parameter u32 length + name, u32 rank, u64 extents, u64 offset; u64
/// total value count and the float32 values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<float>> values;
};

Checkpoint make_checkpoint(const UniMatch& model);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// FormatError (with byte offset) on any header, fingerprint or size mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Copies every checkpoint tensor into `params`. Missing, extra or
/// differently shaped parameters raise FormatError listing all of them.
void apply_checkpoint(const Checkpoint& ckpt, ModelParams& params);

}  // namespace unimatch
