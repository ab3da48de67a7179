#pragma once

// Strict JSON object access: every read records the key, and finish()
// rejects anything that was never read. Errors carry the JSON path.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif
#include "retail/error.hpp"

namespace retail::json_io {

using nlohmann::json;

/// Parses `text`; syntax errors report the 1-based line of the failure.
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError(source + ":" + std::to_string(line) + ": " + e.what(), "", line);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", "");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(where() + ": expected an object", path_);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ParseError(child(key) + ": missing required field", child(key));
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  double number(const std::string& key) { return as_number(required(key), child(key)); }
  double number_or(const std::string& key, double fallback) {
    const auto* v = optional(key);
    return v ? as_number(*v, child(key)) : fallback;
  }
  int integer(const std::string& key) { return as_integer(required(key), child(key)); }
  std::string string(const std::string& key) { return as_string(required(key), child(key)); }
  std::string string_or(const std::string& key, std::string fallback) {
    const auto* v = optional(key);
    return v ? as_string(*v, child(key)) : fallback;
  }
  bool boolean_or(const std::string& key, bool fallback) {
    const auto* v = optional(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ParseError(child(key) + ": expected true/false", child(key));
    return v->get<bool>();
  }

  /// Throws on the first key that no accessor asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ParseError(child(it.key()) + ": unknown field", child(it.key()));
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path + ": expected a number", path);
    return v.get<double>();
  }
  static int as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ParseError(path + ": expected an integer", path);
    return v.get<int>();
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ParseError(path + ": expected a string", path);
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline const json& require_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + ": expected an array", path);
  return v;
}

inline std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

}  // namespace retail::json_io
