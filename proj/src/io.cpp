#include "radiogan/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace radiogan::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void append_le32(std::string& out, std::uint32_t value) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFFu));
}

void append_le64(std::string& out, std::uint64_t value) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFFu));
}

std::uint32_t load_le32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(p[b]);
  return v;
}

std::uint64_t load_le64(const char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(p[b]);
  return v;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::string text = "id,class,path\n";
  for (const auto& row : rows) {
    text += row.id + "," + std::to_string(class_code(row.label)) + "," + row.path + "\n";
  }
  write_file_atomic(path, text);
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "id,class,path") {
    throw std::runtime_error("bad manifest header in " + path.string());
  }
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error("bad manifest row: " + line);
    }
    ManifestRow row;
    row.id = line.substr(0, c1);
    row.label = class_from_code(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)));
    row.path = line.substr(c2 + 1);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace radiogan::io
