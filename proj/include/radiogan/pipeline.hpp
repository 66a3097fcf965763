#ifndef RADIOGAN_PIPELINE_HPP_
#define RADIOGAN_PIPELINE_HPP_

#include "radiogan/volume.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace radiogan {

enum class Axis { z = 0, y = 1, x = 2 };

struct PipelineConfig {
  double target_spacing_mm = 2.0;
  double suv_max = 30.0;
  Axis projection_axis = Axis::y;  // anterior-posterior: coronal view
  Index canvas_height = 160;
  Index canvas_width = 96;
};

void validate(const PipelineConfig& cfg);

/// Canvas-sized projection image in [0, 1] with its class.
struct MipImage {
  Image<float> pixels;
  ClassLabel label = ClassLabel::normal;
  std::string source_id;

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
};

/// Placement of an h x w image scaled into an H x W letterbox.
struct CanvasFit {
  double scale = 1.0;
  Index height = 0, width = 0;  // scaled content size
  Index top = 0, left = 0;      // offset of the content inside the canvas
};

CanvasFit canvas_fit(Index h, Index w, Index canvas_h, Index canvas_w);

namespace detail {

// For each output index, the input index whose center is nearest; ties go to the lower index.
inline std::vector<Index> nearest_index_map(Index n_in, double spacing_in, Index n_out,
                                            double spacing_out) {
  std::vector<Index> map(static_cast<std::size_t>(n_out));
  for (Index o = 0; o < n_out; ++o) {
    const double p = (static_cast<double>(o) + 0.5) * spacing_out;
    const Index guess = static_cast<Index>(std::floor(p / spacing_in - 0.5));
    Index best = -1;
    double best_dist = 0.0;
    for (Index i = std::max<Index>(0, guess - 1); i <= std::min(n_in - 1, guess + 2); ++i) {
      const double d = std::abs((static_cast<double>(i) + 0.5) * spacing_in - p);
      if (best < 0 || d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    if (best < 0) best = guess < 0 ? 0 : n_in - 1;
    map[static_cast<std::size_t>(o)] = best;
  }
  return map;
}

inline Index resampled_extent(Index n, double spacing, double target) {
  return std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(n) * spacing / target)));
}

}  // namespace detail

/// Nearest-neighbour (k = 1) resampling onto an isotropic grid.
template <typename T>
Volume3D<T> resample_nearest(const Volume3D<T>& v, double target_spacing_mm) {
  if (!(target_spacing_mm > 0)) throw std::invalid_argument("target spacing must be positive");
  if (!(v.spacing.z > 0 && v.spacing.y > 0 && v.spacing.x > 0)) {
    throw std::invalid_argument("volume spacing must be positive");
  }
  const Dims3 out_dims{detail::resampled_extent(v.dims.z, v.spacing.z, target_spacing_mm),
                       detail::resampled_extent(v.dims.y, v.spacing.y, target_spacing_mm),
                       detail::resampled_extent(v.dims.x, v.spacing.x, target_spacing_mm)};
  const auto mz = detail::nearest_index_map(v.dims.z, v.spacing.z, out_dims.z, target_spacing_mm);
  const auto my = detail::nearest_index_map(v.dims.y, v.spacing.y, out_dims.y, target_spacing_mm);
  const auto mx = detail::nearest_index_map(v.dims.x, v.spacing.x, out_dims.x, target_spacing_mm);

  Volume3D<T> out(out_dims, Spacing3{target_spacing_mm, target_spacing_mm, target_spacing_mm});
  for (Index k = 0; k < out_dims.z; ++k) {
    for (Index j = 0; j < out_dims.y; ++j) {
      for (Index i = 0; i < out_dims.x; ++i) {
        out(k, j, i) = v(mz[k], my[j], mx[i]);
      }
    }
  }
  return out;
}

/// clamp(v, 0, suv_max) / suv_max
template <typename T>
Volume3D<T> normalize_suv(const Volume3D<T>& v, double suv_max) {
  if (!(suv_max > 0)) throw std::invalid_argument("suv_max must be positive");
  Volume3D<T> out = v;
  const T hi = static_cast<T>(suv_max);
  out.voxels = v.voxels.array().max(T(0)).min(hi) / hi;
  return out;
}

template <typename T>
Image<T> normalize_suv(const Image<T>& img, double suv_max) {
  if (!(suv_max > 0)) throw std::invalid_argument("suv_max must be positive");
  const T hi = static_cast<T>(suv_max);
  return img.array().max(T(0)).min(hi) / hi;
}

/// Maximum intensity projection; rows follow z so the body stays upright.
template <typename T>
Image<T> mip_project(const Volume3D<T>& v, Axis axis) {
  if (axis == Axis::z) throw std::invalid_argument("projection over z is not supported");
  const bool over_y = axis == Axis::y;
  const Index cols = over_y ? v.dims.x : v.dims.y;
  Image<T> out(v.dims.z, cols);
  for (Index k = 0; k < v.dims.z; ++k) {
    for (Index c = 0; c < cols; ++c) {
      T best = over_y ? v(k, 0, c) : v(k, c, 0);
      const Index depth = over_y ? v.dims.y : v.dims.x;
      for (Index d = 1; d < depth; ++d) best = std::max(best, over_y ? v(k, d, c) : v(k, c, d));
      out(k, c) = best;
    }
  }
  return out;
}

/// Bilinear isotropic rescale into the canvas, centered with zero padding.
template <typename T>
Image<T> fit_to_canvas(const Image<T>& img, Index canvas_h, Index canvas_w) {
  if (img.size() == 0) throw std::invalid_argument("cannot fit an empty image");
  const CanvasFit fit = canvas_fit(img.rows(), img.cols(), canvas_h, canvas_w);
  Image<T> out = Image<T>::Zero(canvas_h, canvas_w);
  const double ry = static_cast<double>(img.rows()) / static_cast<double>(fit.height);
  const double rx = static_cast<double>(img.cols()) / static_cast<double>(fit.width);
  auto source = [](Index dst, double ratio, Index n, Index& i0, Index& i1, double& frac) {
    double s = (static_cast<double>(dst) + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<Index>(std::floor(s));
    i1 = std::min(i0 + 1, n - 1);
    frac = s - static_cast<double>(i0);
  };
  for (Index r = 0; r < fit.height; ++r) {
    Index y0, y1;
    double fy;
    source(r, ry, img.rows(), y0, y1, fy);
    for (Index c = 0; c < fit.width; ++c) {
      Index x0, x1;
      double fx;
      source(c, rx, img.cols(), x0, x1, fx);
      const double top = (1 - fx) * static_cast<double>(img(y0, x0)) + fx * static_cast<double>(img(y0, x1));
      const double bottom = (1 - fx) * static_cast<double>(img(y1, x0)) + fx * static_cast<double>(img(y1, x1));
      out(fit.top + r, fit.left + c) = static_cast<T>((1 - fy) * top + fy * bottom);
    }
  }
  return out;
}

/// resample -> SUV normalize -> MIP -> canvas fit, with the label attached.
MipImage preprocess(const Volume& v, ClassLabel label, const PipelineConfig& cfg,
                    std::string source_id = {});

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples); pixel = round(v * 65535).
void write_pgm16(const std::filesystem::path& path, const Image<float>& img);
Image<float> read_pgm16(const std::filesystem::path& path);

}  // namespace radiogan

#endif  // RADIOGAN_PIPELINE_HPP_
