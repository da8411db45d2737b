#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vhu/optim.hpp"
#include "vhu/tensor.hpp"

// VHUT tensor container:
//   "VHUT" | u8 version (=1) | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 ndim | ndim x u32 extents | float64 payload
// All integers and floats little-endian. Entry order is preserved.
namespace vhu {

inline constexpr std::uint8_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries);
// Throws DataError on malformed input.
std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

std::optional<Tensor> find_entry(const std::vector<NamedTensor>& entries, std::string_view name);
// Like find_entry but throws DataError naming the missing entry.
Tensor require_entry(const std::vector<NamedTensor>& entries, std::string_view name);

}  // namespace vhu
