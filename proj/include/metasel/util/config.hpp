#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace metasel {

// Flat key=value configuration. Blank lines and lines starting with '#' are
// ignored; later assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  // Serialized form, keys sorted; parse(dump()) round-trips.
  std::string dump() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string join_list(const std::vector<std::string>& items, char sep = ',');

// Shortest text that parses back to the same double.
std::string format_number(double x);

}  // namespace metasel
