#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox {

/// Flat `key = value` text. Blank lines and `#` comments are ignored;
/// duplicate keys and keys outside the allowed set are rejected (Config).
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::set<std::string>& allowed);
  static KeyValueConfig load(const std::filesystem::path& path, const std::set<std::string>& allowed);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Vec3 get_vec3(const std::string& key, const Vec3& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pointvox
