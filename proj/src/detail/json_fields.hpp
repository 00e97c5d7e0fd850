#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "fsb/error.hpp"

namespace fsb::detail {

inline nlohmann::json parse_json(const std::string& text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": invalid JSON: " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": field '" + std::string(key) + "' has the wrong type");
  }
}

// Reads key into out when present; out keeps its default otherwise.
template <typename T>
void optional_field(const nlohmann::json& j, const char* key, const std::string& where, T& out) {
  if (j.contains(key)) out = field<T>(j, key, where);
}

}  // namespace fsb::detail
