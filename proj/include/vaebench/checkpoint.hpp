#pragma once

#include <span>
#include <string>
#include <vector>

#include "vaebench/autodiff.hpp"

namespace vaebench {

/// Parameter checkpoint container.
///
/// Layout, all integers little-endian:
///   magic "VBCK" | u32 version (=1) | u32 count
///   count x { u32 name_len | name bytes | u32 rank | rank x u64 dims }
///   count x { flat float64 LE array, numel(dims) values }
struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
void save_checkpoint(const std::string& path, std::span<Parameter* const> params);
std::vector<NamedTensor> load_checkpoint(const std::string& path);
/// Copies matching entries into params by name; missing names or shape mismatches throw.
void load_checkpoint_into(const std::string& path, std::span<Parameter* const> params);

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::vector<std::uint8_t> bytes);

}  // namespace vaebench
