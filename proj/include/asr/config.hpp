// `key = value` run configuration with `#` comments, dotted keys, and
// command-line overrides.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace asr {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Strict scalar parsers; throw ConfigError naming `what` on bad input.
int parse_int(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);
/// Comma-separated integers; empty string -> empty list.
std::vector<int> parse_int_list(const std::string& s, const std::string& what);
std::string format_int_list(const std::vector<int>& v);

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  /// Adds or replaces one key (command-line `--set key=value`).
  void set(const std::string& key, const std::string& value);
  /// Parses `key=value`.
  void set_assignment(const std::string& assignment);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void erase(const std::string& key) { entries_.erase(key); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  /// Entries whose key starts with `prefix`, keyed by the remainder.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

  /// Throws ConfigError listing every key that no getter asked for.
  void reject_unused() const;

  /// Every key read so far with the value in effect (defaults included),
  /// plus all explicit entries.
  Config effective() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  /// Sorted `key = value` lines.
  std::string dump() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
  mutable std::map<std::string, std::string> defaults_;
};

}  // namespace asr
