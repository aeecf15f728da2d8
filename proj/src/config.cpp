#include "asr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "asr/binary_io.hpp"
#include "asr/errors.hpp"

namespace asr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_key(const std::string& key, const std::string& where) {
  if (key.empty()) throw ConfigError(where + ": empty key");
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) {
      throw ConfigError(where + ": invalid key '" + key + "'");
    }
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(what + ": expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(what + ": expected true/false, got '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item), what));
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    check_key(key, where);
    if (c.entries_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    c.entries_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  check_key(key, "override");
  entries_[key] = trim(value);
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = fallback;
    return fallback;
  }
  return it->second;
}

std::string Config::require_string(const std::string& key) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = std::to_string(fallback);
    return fallback;
  }
  return parse_int(it->second, key);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = std::to_string(fallback);
    return fallback;
  }
  return parse_u64(it->second, key);
}

double Config::get_double(const std::string& key, double fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = format_double(fallback);
    return fallback;
  }
  return parse_double(it->second, key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = fallback ? "true" : "false";
    return fallback;
  }
  return parse_bool(it->second, key);
}

std::vector<int> Config::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    defaults_[key] = format_int_list(fallback);
    return fallback;
  }
  return parse_int_list(it->second, key);
}

std::map<std::string, std::string> Config::with_prefix(const std::string& prefix) const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k.rfind(prefix, 0) == 0) {
      used_.insert(k);
      out[k.substr(prefix.size())] = v;
    }
  }
  return out;
}

void Config::reject_unused() const {
  std::string unknown;
  for (const auto& [k, v] : entries_) {
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

Config Config::effective() const {
  Config out;
  out.entries_ = entries_;
  for (const auto& [k, v] : defaults_) out.entries_.emplace(k, v);
  return out;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t Config::hash() const { return io::fnv1a(dump()); }

}  // namespace asr
