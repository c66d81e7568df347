#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"

namespace gpgm {

/// Row-major grid over the local x-y plane. Pixel (u, v) has its center at
/// (origin_x + resolution * u, origin_y + resolution * v).
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 1.0;
  std::vector<T> values;

  Raster() = default;
  Raster(int w, int h, double ox, double oy, double res, T fill = T{})
      : width(w), height(h), origin_x(ox), origin_y(oy), resolution(res) {
    if (w < 1 || h < 1) throw InvalidArgument("Raster: dimensions must be at least 1x1");
    if (!(res > 0.0)) throw InvalidArgument("Raster: resolution must be positive");
    values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  template <typename U>
  static Raster like(const Raster<U>& other, T fill = T{}) {
    return Raster(other.width, other.height, other.origin_x, other.origin_y, other.resolution, fill);
  }

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  T& at(int u, int v) { return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  const T& at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)];
  }

  template <typename U>
  bool same_geometry(const Raster<U>& o) const {
    return width == o.width && height == o.height && origin_x == o.origin_x && origin_y == o.origin_y &&
           resolution == o.resolution;
  }

  /// Bilinear interpolation at a subpixel location, clamped to the raster.
  double sample(double u, double v) const {
    u = std::clamp(u, 0.0, static_cast<double>(width - 1));
    v = std::clamp(v, 0.0, static_cast<double>(height - 1));
    const int u0 = std::min(static_cast<int>(std::floor(u)), width - 1), v0 = std::min(static_cast<int>(std::floor(v)), height - 1);
    const int u1 = std::min(u0 + 1, width - 1), v1 = std::min(v0 + 1, height - 1);
    const double fu = u - u0, fv = v - v0;
    return (1 - fu) * (1 - fv) * static_cast<double>(at(u0, v0)) + fu * (1 - fv) * static_cast<double>(at(u1, v0)) +
           (1 - fu) * fv * static_cast<double>(at(u0, v1)) + fu * fv * static_cast<double>(at(u1, v1));
  }
};

template <typename T>
Point3 pixel_to_local(const Raster<T>& r, int u, int v, double z) {
  if (!r.in_bounds(u, v)) throw InvalidArgument("pixel_to_local: pixel out of bounds");
  return {r.origin_x + r.resolution * u, r.origin_y + r.resolution * v, z};
}

/// Nearest pixel to a local x-y position.
template <typename T>
std::pair<int, int> local_to_pixel(const Raster<T>& r, double x, double y) {
  const double fu = std::round((x - r.origin_x) / r.resolution);
  const double fv = std::round((y - r.origin_y) / r.resolution);
  if (!(fu >= 0.0 && fv >= 0.0 && fu < r.width && fv < r.height))
    throw InvalidArgument("local_to_pixel: position outside the raster footprint");
  return {static_cast<int>(fu), static_cast<int>(fv)};
}

}  // namespace gpgm
