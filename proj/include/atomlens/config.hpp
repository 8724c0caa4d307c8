#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "errors.hpp"

namespace atomlens {

using json = nlohmann::json;

inline constexpr const char* result_schema = "atomlens/result/v1";

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(path + ": " + e.what());
  }
}

// Unknown keys are rejected rather than ignored: a typoed option that
// silently falls back to a default is the worst failure mode a config
// file can have.
inline void check_keys(const json& obj, const std::string& context,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw config_error(context + ": expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        ok = true;
        break;
      }
    if (!ok) throw config_error(context + ": unknown key '" + item.key() + "'");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& context) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw config_error(context + ": missing required key '" + key + "'");
  return *it;
}

inline double get_num(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_number()) throw config_error(context + ": '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline double get_num_or(const json& obj, const char* key, double fallback,
                         const std::string& context) {
  if (!obj.contains(key)) return fallback;
  return get_num(obj, key, context);
}

inline long get_int(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_number_integer()) throw config_error(context + ": '" + std::string(key) + "' must be an integer");
  return v.get<long>();
}

inline long get_int_or(const json& obj, const char* key, long fallback,
                       const std::string& context) {
  if (!obj.contains(key)) return fallback;
  return get_int(obj, key, context);
}

inline bool get_bool_or(const json& obj, const char* key, bool fallback,
                        const std::string& context) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw config_error(context + ": '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

inline std::string get_str(const json& obj, const char* key, const std::string& context) {
  const json& v = require(obj, key, context);
  if (!v.is_string()) throw config_error(context + ": '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline std::string get_str_or(const json& obj, const char* key, const std::string& fallback,
                              const std::string& context) {
  if (!obj.contains(key)) return fallback;
  return get_str(obj, key, context);
}

// FNV-1a over the canonical dump (nlohmann sorts object keys, so two configs
// with the same content hash identically regardless of key order on disk).
inline std::string config_hash_hex(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline void save_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace atomlens
