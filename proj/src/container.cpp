#include "vhu/container.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

namespace vhu {

namespace {

constexpr char kMagic[4] = {'V', 'H', 'U', 'T'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("VHUT: truncated container");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kContainerVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw DataError("VHUT: entry name too long: " + name);
    if (t.ndim() > std::numeric_limits<std::uint8_t>::max()) throw DataError("VHUT: too many axes in " + name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.ndim()));
    for (auto e : t.shape()) {
      if (e > std::numeric_limits<std::uint32_t>::max()) throw DataError("VHUT: extent overflow in " + name);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    }
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw DataError("VHUT: bad magic bytes");
  const auto version = r.get<std::uint8_t>();
  if (version != kContainerVersion) throw DataError("VHUT: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>();
    std::string name = r.get_string(len);
    const auto ndim = r.get<std::uint8_t>();
    Shape shape(ndim);
    for (auto& e : shape) e = r.get<std::uint32_t>();
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(r.get<std::uint64_t>());
    entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw DataError("VHUT: trailing bytes after last entry");
  return entries;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  const auto bytes = encode_container(entries);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::optional<Tensor> find_entry(const std::vector<NamedTensor>& entries, std::string_view name) {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  return std::nullopt;
}

Tensor require_entry(const std::vector<NamedTensor>& entries, std::string_view name) {
  auto t = find_entry(entries, name);
  if (!t) throw DataError("container has no entry named '" + std::string(name) + "'");
  return *t;
}

}  // namespace vhu
