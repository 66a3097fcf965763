#include "radiogan/pipeline.hpp"

#include "radiogan/io.hpp"

#include <sstream>

namespace radiogan {

void validate(const PipelineConfig& cfg) {
  if (!(cfg.target_spacing_mm > 0)) throw std::invalid_argument("target spacing must be positive");
  if (!(cfg.suv_max > 0)) throw std::invalid_argument("suv_max must be positive");
  if (cfg.projection_axis == Axis::z) throw std::invalid_argument("projection axis must be y or x");
  if (cfg.canvas_height <= 0 || cfg.canvas_width <= 0) {
    throw std::invalid_argument("canvas must be non-empty");
  }
}

CanvasFit canvas_fit(Index h, Index w, Index canvas_h, Index canvas_w) {
  CanvasFit fit;
  fit.scale = std::min(static_cast<double>(canvas_h) / static_cast<double>(h),
                       static_cast<double>(canvas_w) / static_cast<double>(w));
  fit.height = std::clamp<Index>(static_cast<Index>(std::llround(static_cast<double>(h) * fit.scale)), 1,
                                 canvas_h);
  fit.width = std::clamp<Index>(static_cast<Index>(std::llround(static_cast<double>(w) * fit.scale)), 1,
                                canvas_w);
  fit.top = (canvas_h - fit.height) / 2;
  fit.left = (canvas_w - fit.width) / 2;
  return fit;
}

MipImage preprocess(const Volume& v, ClassLabel label, const PipelineConfig& cfg, std::string source_id) {
  validate(cfg);
  const Volume iso = resample_nearest(v, cfg.target_spacing_mm);
  const Image<float> mip = mip_project(normalize_suv(iso, cfg.suv_max), cfg.projection_axis);
  MipImage out;
  out.pixels = fit_to_canvas(mip, cfg.canvas_height, cfg.canvas_width).array().max(0.0f).min(1.0f);
  out.label = label;
  out.source_id = std::move(source_id);
  return out;
}

void write_pgm16(const std::filesystem::path& path, const Image<float>& img) {
  std::string bytes = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n65535\n";
  bytes.reserve(bytes.size() + 2 * static_cast<std::size_t>(img.size()));
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) {
      const double v = std::clamp(static_cast<double>(img(r, c)), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      bytes.push_back(static_cast<char>(q >> 8));
      bytes.push_back(static_cast<char>(q & 0xFF));
    }
  }
  io::write_file_atomic(path, bytes);
}

Image<float> read_pgm16(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  Index width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || !in || width <= 0 || height <= 0 || maxval != 65535) {
    throw std::runtime_error("not a 16-bit P5 PGM: " + path.string());
  }
  const auto offset = static_cast<std::size_t>(in.tellg()) + 1;  // single whitespace after maxval
  if (bytes.size() != offset + 2 * static_cast<std::size_t>(width * height)) {
    throw std::runtime_error("PGM payload size mismatch in " + path.string());
  }
  Image<float> img(height, width);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      const unsigned q = (static_cast<unsigned>(p[0]) << 8) | p[1];
      img(r, c) = static_cast<float>(q / 65535.0);
      p += 2;
    }
  }
  return img;
}

}  // namespace radiogan
