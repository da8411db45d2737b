#pragma once

#include <filesystem>

#include "vhu/tensor.hpp"

namespace vhu {

// 16-bit binary "P5", big-endian samples, image min-max mapped to 0..65535
// (a constant image maps to 0). Accepts [H,W] or [1,H,W].
void write_pgm16(const std::filesystem::path& path, const Tensor& image);
// Raw sample values as [1,H,W]; throws DataError on anything but 16-bit P5.
Tensor read_pgm16(const std::filesystem::path& path);

}  // namespace vhu
