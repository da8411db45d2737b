#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace vhu {

using ConfigMap = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment; blank lines ignored. Throws
// ConfigError on a line without '=', an empty key or a repeated key.
ConfigMap parse_config(std::string_view text);
ConfigMap load_config(const std::filesystem::path& path);
// Inverse of parse_config, keys sorted.
std::string render_config(const ConfigMap& config);
void save_config(const std::filesystem::path& path, const ConfigMap& config);

/// Typed access that remembers which keys were read. finish() rejects keys
/// nobody asked for, so call it after reading everything and before doing work.
class ConfigReader {
 public:
  explicit ConfigReader(ConfigMap values) : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  // All keys starting with prefix, with the prefix stripped.
  ConfigMap take_prefixed(const std::string& prefix);

  void finish() const;
  // Every value read so far, including fallbacks: the fully resolved config.
  const ConfigMap& resolved() const { return resolved_; }

 private:
  const std::string* lookup(const std::string& key);

  ConfigMap values_;
  ConfigMap resolved_;
  std::set<std::string> used_;
};

}  // namespace vhu
