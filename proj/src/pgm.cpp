#include "vhu/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "vhu/error.hpp"

namespace vhu {

void write_pgm16(const std::filesystem::path& path, const Tensor& image) {
  const auto& s = image.shape();
  std::size_t h = 0, w = 0;
  if (s.size() == 2) {
    h = s[0], w = s[1];
  } else if (s.size() == 3 && s[0] == 1) {
    h = s[1], w = s[2];
  } else {
    throw ShapeError("write_pgm16: expected [H,W] or [1,H,W], got " + shape_str(s));
  }
  const auto v = image.values();
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, span = *mx - *mn;
  std::string bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (double x : v) {
    const double u = span > 0 ? (x - lo) / span : 0.0;
    const auto q = static_cast<unsigned>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xFF));
  }
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

Tensor read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || !in || maxval != 65535 || w == 0 || h == 0) {
    throw DataError(path.string() + ": not a 16-bit binary PGM");
  }
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raw(2 * w * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw DataError(path.string() + ": truncated raster");
  std::vector<double> v(w * h);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return Tensor({1, h, w}, std::move(v));
}

}  // namespace vhu
