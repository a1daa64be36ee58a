#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/nn/tensor.hpp"

namespace uvmakeup::nn {

/// Self-describing model container.
///
/// Layout (little-endian):
///   "UVMC" | u32 version | str kind | u64 iteration | str metadata-json |
///   u32 count | count x (str name | 4 x u32 shape | f32 data) | 32-byte SHA-256
/// where `str` is u32 length followed by bytes. The digest covers every byte
/// before it, so truncation and corruption are both detected before any state
/// is returned.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string kind;
  std::uint64_t iteration = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor<float>> tensors;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws Error{checkpoint} on any structural problem or kind mismatch.
/// An empty `expected_kind` accepts any kind.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes,
                            const std::string& expected_kind = {});

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind = {});

/// SHA-256 over parameter names, shapes and values; stable across save/load.
std::string parameter_checksum(const std::map<std::string, Tensor<float>>& tensors);

}  // namespace uvmakeup::nn
