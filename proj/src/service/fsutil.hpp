#pragma once

#include <filesystem>
#include <string>

namespace vannot::service {

// Writes to a sibling temp file and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_all(const std::filesystem::path& path);

}  // namespace vannot::service
