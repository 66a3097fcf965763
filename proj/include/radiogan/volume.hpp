#ifndef RADIOGAN_VOLUME_HPP_
#define RADIOGAN_VOLUME_HPP_

#include "radiogan/types.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace radiogan {

/// Voxel counts in (z, y, x) order.
struct Dims3 {
  Index z = 0, y = 0, x = 0;

  Index count() const { return z * y * x; }
  Index operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

/// Millimetres per voxel in (z, y, x) order.
struct Spacing3 {
  double z = 1.0, y = 1.0, x = 1.0;

  double operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
  friend bool operator==(const Spacing3&, const Spacing3&) = default;
};

/// Dense 3D voxel grid in SUV units, z-major (x fastest).
template <typename T>
struct Volume3D {
  Dims3 dims;
  Spacing3 spacing;
  Vector<T> voxels;

  Volume3D() = default;
  Volume3D(Dims3 d, Spacing3 s) : dims(d), spacing(s), voxels(Vector<T>::Zero(d.count())) {}

  Index offset(Index k, Index j, Index i) const { return (k * dims.y + j) * dims.x + i; }
  T& operator()(Index k, Index j, Index i) { return voxels[offset(k, j, i)]; }
  const T& operator()(Index k, Index j, Index i) const { return voxels[offset(k, j, i)]; }
};

using Volume = Volume3D<float>;

template <typename T>
void validate(const Volume3D<T>& v) {
  if (v.dims.z <= 0 || v.dims.y <= 0 || v.dims.x <= 0) {
    throw std::invalid_argument("volume dims must be positive");
  }
  if (!(v.spacing.z > 0 && v.spacing.y > 0 && v.spacing.x > 0)) {
    throw std::invalid_argument("volume spacing must be positive");
  }
  if (v.voxels.size() != v.dims.count()) {
    throw std::invalid_argument("voxel count does not match dims");
  }
  if (!v.voxels.allFinite() || (v.voxels.size() > 0 && v.voxels.minCoeff() < T(0))) {
    throw std::invalid_argument("voxels must be finite and non-negative");
  }
}

/// PVOL1: ASCII header then raw little-endian float32, z-major.
void write_pvol(const std::filesystem::path& path, const Volume& v);
Volume read_pvol(const std::filesystem::path& path);

}  // namespace radiogan

#endif  // RADIOGAN_VOLUME_HPP_
