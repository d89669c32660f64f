#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace omk::io {

std::string read_text(const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// reader never observes a partially written file.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Same as write_atomic, but the payload is produced by a callback that may
/// throw; on failure the target path is left untouched.
void write_atomic_with(const std::filesystem::path& path,
                       const std::function<void(std::string&)>& produce);

struct JsonLine {
  std::size_t line_number; // 1-based
  nlohmann::json value;
};

/// Parses a JSONL file. Blank lines are skipped. Malformed lines raise
/// omk::Error naming the file and line number.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);

// Little-endian scalar helpers for the binary formats.
void put_u32le(std::string& out, std::uint32_t v);
void put_f32le(std::string& out, float v);
std::uint32_t get_u32le(const unsigned char* p);
float get_f32le(const unsigned char* p);

} // namespace omk::io
