#ifndef RADIOGAN_IO_HPP_
#define RADIOGAN_IO_HPP_

#include "radiogan/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace radiogan::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

void append_le32(std::string& out, std::uint32_t value);
void append_le64(std::string& out, std::uint64_t value);
std::uint32_t load_le32(const char* p);
std::uint64_t load_le64(const char* p);

/// One manifest row: `id,class,path` (class is the integer code).
struct ManifestRow {
  std::string id;
  ClassLabel label = ClassLabel::normal;
  std::string path;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace radiogan::io

#endif  // RADIOGAN_IO_HPP_
