#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fm::io {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

void ensure_directory(const std::filesystem::path& dir);

/// Appends `text` and flushes; creates the file if needed.
void append_text(const std::filesystem::path& path, std::string_view text);

/// Non-blank lines of a line-delimited document, without terminators.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace fm::io
