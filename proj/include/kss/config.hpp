#pragma once

// Flat `key = value` configuration files. `#` starts a comment; blank lines
// are ignored; keys may not repeat.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kss/error.hpp"
#include "kss/text.hpp"

namespace kss {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::vector<std::string>& lines) {
    KeyValueConfig cfg;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      std::string_view line = lines[ln];
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = text::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw FormatError("config line " + std::to_string(ln + 1) + ": expected key = value");
      const std::string key(text::trim(line.substr(0, eq)));
      const std::string value(text::trim(line.substr(eq + 1)));
      if (key.empty()) throw FormatError("config line " + std::to_string(ln + 1) + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        throw FormatError("config: key '" + key + "' given twice");
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) { return parse(text::read_lines(path)); }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void erase(const std::string& key) { values_.erase(key); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Rejects keys outside `known`.
  void check_keys(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_)
      if (!known.contains(k)) throw ValidationError("config: unknown key '" + k + "'");
  }

  std::optional<std::string> get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    auto v = text::parse_double(*s);
    if (!v) throw ValidationError("config: '" + key + "' is not a number: " + *s);
    return v;
  }

  template <typename Int = std::size_t>
  std::optional<Int> get_int(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    auto v = text::parse_int<Int>(*s);
    if (!v) throw ValidationError("config: '" + key + "' is not an integer: " + *s);
    return v;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    throw ValidationError("config: '" + key + "' is not a boolean: " + *s);
  }

  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace kss
