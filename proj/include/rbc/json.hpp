#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace rbc {

/// Insertion-ordered so reports serialise byte-identically run to run.
using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// 64-bit FNV-1a of the compact serialisation, as 16 hex digits.
std::string json_hash(const Json& j);

}  // namespace rbc
