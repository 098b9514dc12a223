#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vaebench {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Typed getters throw ConfigError naming the key on malformed values.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);

  /// Applies `key=value` overrides; later entries win.
  void apply_overrides(const std::vector<std::string>& overrides);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  /// Throws ConfigError listing any key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_list(const std::string& key, const std::vector<std::size_t>& fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  /// One `key = value` per line, sorted by key.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace vaebench
