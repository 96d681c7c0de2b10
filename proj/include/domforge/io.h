#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace domforge {

// Writes `content` to a temporary sibling of `path` and renames it into
// place, so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace domforge
