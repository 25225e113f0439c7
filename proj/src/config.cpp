#include "pointvox/config.hpp"

#include <fstream>

#include "csv_util.hpp"

namespace pointvox {

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::set<std::string>& allowed) {
  KeyValueConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (!allowed.count(key)) throw Error(ErrorCode::Config, "unknown key '" + key + "'");
    if (!cfg.values_.emplace(key, value).second) throw Error(ErrorCode::Config, "duplicate key '" + key + "'");
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path, const std::set<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config: " + path.string());
  return parse(in, allowed);
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return detail::parse_double(it->second);
  } catch (const Error&) {
    throw Error(ErrorCode::Config, "key '" + key + "' expects a number");
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return detail::parse_int(it->second);
  } catch (const Error&) {
    throw Error(ErrorCode::Config, "key '" + key + "' expects an integer");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error(ErrorCode::Config, "key '" + key + "' expects true/false");
}

Vec3 KeyValueConfig::get_vec3(const std::string& key, const Vec3& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto parts = detail::split_csv(it->second);
  if (parts.size() != 3) throw Error(ErrorCode::Config, "key '" + key + "' expects three comma-separated numbers");
  try {
    return {detail::parse_double(parts[0]), detail::parse_double(parts[1]), detail::parse_double(parts[2])};
  } catch (const Error&) {
    throw Error(ErrorCode::Config, "key '" + key + "' expects three comma-separated numbers");
  }
}

}  // namespace pointvox
