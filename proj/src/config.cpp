#include "vhu/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vhu/error.hpp"

namespace vhu {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

ConfigMap load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [k, v] : config) out += k + " = " + v + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const ConfigMap& config) {
  std::ofstream out(path, std::ios::binary);
  out << render_config(config);
  if (!out) throw DataError("cannot write " + path.string());
}

const std::string* ConfigReader::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  const auto* v = lookup(key);
  return resolved_[key] = v ? *v : fallback;
}

std::string ConfigReader::require_string(const std::string& key) {
  const auto* v = lookup(key);
  if (!v || v->empty()) throw ConfigError("missing required key '" + key + "'");
  return resolved_[key] = *v;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  const auto* v = lookup(key);
  double out = fallback;
  if (v) {
    std::size_t pos = 0;
    try {
      out = std::stod(*v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v->size()) throw ConfigError("key '" + key + "': not a number: " + *v);
  }
  resolved_[key] = format_double(out);
  return out;
}

std::uint64_t ConfigReader::get_u64(const std::string& key, std::uint64_t fallback) {
  const auto* v = lookup(key);
  std::uint64_t out = fallback;
  if (v) {
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size()) {
      throw ConfigError("key '" + key + "': not a nonnegative integer: " + *v);
    }
  }
  resolved_[key] = std::to_string(out);
  return out;
}

std::size_t ConfigReader::get_size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  const auto* v = lookup(key);
  bool out = fallback;
  if (v) {
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      throw ConfigError("key '" + key + "': not a boolean: " + *v);
    }
  }
  resolved_[key] = out ? "true" : "false";
  return out;
}

ConfigMap ConfigReader::take_prefixed(const std::string& prefix) {
  ConfigMap out;
  for (const auto& [k, v] : values_) {
    if (k.rfind(prefix, 0) == 0) {
      used_.insert(k);
      resolved_[k] = v;
      out[k.substr(prefix.size())] = v;
    }
  }
  return out;
}

void ConfigReader::finish() const {
  std::string unknown;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

}  // namespace vhu
