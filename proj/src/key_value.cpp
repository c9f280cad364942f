#include "mttf/key_value.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mttf/errors.hpp"

namespace mttf {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValueMap KeyValueMap::read_block(std::istream& in) {
  KeyValueMap map;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) break;
    if (t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config", "malformed line (expected key=value): " + t);
    map.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return map;
}

KeyValueMap KeyValueMap::parse(const std::string& text) {
  // A config file may contain blank lines between groups, so parse line by
  // line instead of stopping at the first blank.
  KeyValueMap map;
  std::istringstream in(text);
  while (in) {
    KeyValueMap block = read_block(in);
    for (auto& [k, v] : block.values_) map.values_[k] = v;
  }
  return map;
}

KeyValueMap KeyValueMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

void KeyValueMap::write_block(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  out << '\n';
}

void KeyValueMap::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  values_[key] = buf;
}

const std::string& KeyValueMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config", "missing key '" + key + "'");
  return it->second;
}

std::string KeyValueMap::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long KeyValueMap::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config", "key '" + key + "' is not an integer: " + s);
  }
  return v;
}

long long KeyValueMap::get_int_or(const std::string& key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

double KeyValueMap::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config", "key '" + key + "' is not a number: " + s);
  }
}

double KeyValueMap::get_double_or(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

std::vector<long long> KeyValueMap::get_int_list_or(const std::string& key,
                                                    std::vector<long long> fallback) const {
  if (!contains(key)) return fallback;
  std::vector<long long> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ConfigError("config", "key '" + key + "' has a non-integer entry: " + item);
    }
  }
  return out;
}

}  // namespace mttf
