#pragma once

#include <boost/property_tree/ptree.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace decor {

// Sectioned key = value text (INI dialect). Backs both scenario files and
// run configs. Keys may not contain '.'.
class KeyValueFile {
 public:
  static KeyValueFile load(const std::string& path);
  static KeyValueFile parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Ordered (key, value) pairs of a section, in file order.
  std::vector<std::pair<std::string, std::string>> entries(const std::string& section) const;

  const std::string& text() const { return text_; }

 private:
  boost::property_tree::ptree tree_;
  std::string text_;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace decor
