#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace mttf {

// Ordered key=value store used by checkpoint headers and training configs.
// Lines starting with '#' are comments; surrounding whitespace is trimmed.
class KeyValueMap {
 public:
  KeyValueMap() = default;

  // Reads lines until a blank line or end of stream.
  static KeyValueMap read_block(std::istream& in);
  static KeyValueMap parse(const std::string& text);
  static KeyValueMap load_file(const std::string& path);

  // Writes key=value lines followed by the terminating blank line.
  void write_block(std::ostream& out) const;

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, long long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, double value);

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::vector<long long> get_int_list_or(const std::string& key, std::vector<long long> fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mttf
