#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace neckface {

/// Writes to a sibling temp file then renames it over `path`.
void atomic_write_text(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

void ensure_directory(const std::filesystem::path& dir);

}  // namespace neckface
