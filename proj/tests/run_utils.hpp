#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace runutil {

inline nlohmann::json strip_wall_clock(nlohmann::json doc) {
  if (doc.is_object()) {
    doc.erase("wall_clock_seconds");
    for (auto& [key, value] : doc.items()) value = strip_wall_clock(value);
  } else if (doc.is_array()) {
    for (auto& value : doc) value = strip_wall_clock(value);
  }
  return doc;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline nlohmann::json read_json(const std::filesystem::path& path) { return nlohmann::json::parse(read_text(path)); }

// Byte comparison of the serialized documents with wall-clock fields removed.
inline bool same_results(const std::filesystem::path& a, const std::filesystem::path& b) {
  return strip_wall_clock(read_json(a)).dump() == strip_wall_clock(read_json(b)).dump();
}

}  // namespace runutil
