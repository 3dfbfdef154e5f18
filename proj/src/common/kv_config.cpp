#include "common/kv_config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace decor {

namespace pt = boost::property_tree;

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile f;
  f.text_ = text;
  std::istringstream in(text);
  try {
    pt::read_ini(in, f.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed key-value file: ") + e.what());
  }
  return f;
}

std::optional<std::string> KeyValueFile::raw(const std::string& section,
                                             const std::string& key) const {
  auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!sec) return std::nullopt;
  auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
  if (!v) return std::nullopt;
  std::string s = *v;
  // strip trailing inline comment
  if (auto pos = s.find(" ;"); pos != std::string::npos) s.erase(pos);
  if (auto pos = s.find(" #"); pos != std::string::npos) s.erase(pos);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

bool KeyValueFile::has(const std::string& section, const std::string& key) const {
  return raw(section, key).has_value();
}

std::string KeyValueFile::get_string(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
  return raw(section, key).value_or(fallback);
}

double KeyValueFile::get_double(const std::string& section, const std::string& key,
                                double fallback) const {
  auto v = raw(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": not a number: '" + *v + "'");
  }
}

long long KeyValueFile::get_int(const std::string& section, const std::string& key,
                                long long fallback) const {
  auto v = raw(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    // accept 2e5-style budgets
    if (v->find_first_of(".eE") != std::string::npos) {
      double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return static_cast<long long>(d);
    }
    long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return i;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": not an integer: '" + *v + "'");
  }
}

bool KeyValueFile::get_bool(const std::string& section, const std::string& key,
                            bool fallback) const {
  auto v = raw(section, key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorKind::kConfig, "[" + section + "] " + key + ": not a boolean: '" + *v + "'");
}

std::vector<std::pair<std::string, std::string>> KeyValueFile::entries(
    const std::string& section) const {
  std::vector<std::pair<std::string, std::string>> out;
  auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!sec) return out;
  for (const auto& [k, v] : *sec) out.emplace_back(k, *raw(section, k));
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace decor
