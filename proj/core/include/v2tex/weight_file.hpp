#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "v2tex/v2_stage.hpp"

namespace v2tex {

/// Weight file layout (all integers 64-bit little-endian unsigned):
///
///   "V2TEX001"                      8 magic bytes
///   tensor count
///   per tensor: name length, UTF-8 name, rank, dims[rank],
///               payload as little-endian IEEE-754 doubles, row-major
///   CRC-32 of every preceding byte  (32-bit little-endian)
inline constexpr std::string_view kWeightMagic = "V2TEX001";

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::string encode_weight_file(const std::vector<NamedTensor>& tensors);

/// Throws FormatError on bad magic, truncation, trailing bytes, payload/shape
/// disagreement or CRC mismatch.
std::vector<NamedTensor> decode_weight_file(std::string_view bytes);

void write_weight_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_weight_file(const std::filesystem::path& path);

std::uint32_t crc32(std::string_view bytes);

// ---------------------------------------------------------------------------
// Checkpoints: theta, bn_running_mean, bn_running_var (required) plus
// bn_momentum, pool_window and step.
// ---------------------------------------------------------------------------

struct Checkpoint {
  V2Params params;
  std::uint64_t step = 0;
};

void save_checkpoint(const V2Params& params, const std::filesystem::path& path,
                     std::uint64_t step = 0);

/// Loads and validates a checkpoint. When `expected` is given, theta's shape
/// must match it exactly; the error names both shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<V2Params>& expected = std::nullopt);

}  // namespace v2tex
