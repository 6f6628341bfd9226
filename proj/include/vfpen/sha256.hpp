#pragma once

#include <filesystem>
#include <string>

namespace vfpen {

// Hex digest of a byte string / file (used by fetch-data to report checksums).
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace vfpen
