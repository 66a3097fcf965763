#include "radiogan/volume.hpp"

#include "radiogan/io.hpp"

#include <bit>
#include <sstream>

namespace radiogan {

void write_pvol(const std::filesystem::path& path, const Volume& v) {
  validate(v);
  std::ostringstream header;
  header.precision(17);
  header << "PVOL1\n"
         << "dims " << v.dims.z << ' ' << v.dims.y << ' ' << v.dims.x << '\n'
         << "spacing " << v.spacing.z << ' ' << v.spacing.y << ' ' << v.spacing.x << '\n'
         << "dtype f32le\n\n";
  std::string bytes = header.str();
  bytes.reserve(bytes.size() + 4 * static_cast<std::size_t>(v.voxels.size()));
  for (Index n = 0; n < v.voxels.size(); ++n) {
    io::append_le32(bytes, std::bit_cast<std::uint32_t>(v.voxels[n]));
  }
  io::write_file_atomic(path, bytes);
}

Volume read_pvol(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::size_t pos = 0;
  auto next_line = [&]() {
    auto end = bytes.find('\n', pos);
    if (end == std::string::npos) throw std::runtime_error("truncated PVOL1 header: " + path.string());
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };
  if (next_line() != "PVOL1") throw std::runtime_error("not a PVOL1 file: " + path.string());

  Dims3 dims;
  Spacing3 spacing;
  {
    std::istringstream in(next_line());
    std::string key;
    in >> key >> dims.z >> dims.y >> dims.x;
    if (key != "dims" || !in) throw std::runtime_error("bad dims line in " + path.string());
  }
  {
    std::istringstream in(next_line());
    std::string key;
    in >> key >> spacing.z >> spacing.y >> spacing.x;
    if (key != "spacing" || !in) throw std::runtime_error("bad spacing line in " + path.string());
  }
  if (next_line() != "dtype f32le") throw std::runtime_error("unsupported dtype in " + path.string());
  if (!next_line().empty()) throw std::runtime_error("missing blank line in " + path.string());

  if (dims.z <= 0 || dims.y <= 0 || dims.x <= 0) {
    throw std::runtime_error("bad dims in " + path.string());
  }
  Volume v(dims, spacing);
  const auto expected = 4 * static_cast<std::size_t>(dims.count());
  if (bytes.size() - pos != expected) {
    throw std::runtime_error("PVOL1 payload size mismatch in " + path.string());
  }
  for (Index n = 0; n < v.voxels.size(); ++n) {
    v.voxels[n] = std::bit_cast<float>(io::load_le32(bytes.data() + pos + 4 * n));
  }
  validate(v);
  return v;
}

}  // namespace radiogan
