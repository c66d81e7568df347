#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gpgm/bow.hpp"
#include "gpgm/features.hpp"
#include "gpgm/raster.hpp"
#include "gpgm/ski.hpp"

namespace gpgm {

struct GpgMapOptions {
  SeKernelParams kernel;
  double resolution = 0.05;       ///< raster m/pixel
  double inducing_spacing = 0.0;  ///< <= 0 selects 2 * resolution
  double margin = -1.0;           ///< < 0 selects 2 * spacing + 2 * length_scale
  double proxy_radius = 0.0;      ///< <= 0 selects length_scale / 2
  double mask_threshold = 0.5;    ///< mask keeps confidence >= threshold * sigma_f^2
  CgOptions cg;
  SiftOptions sift;

  double spacing() const { return inducing_spacing > 0.0 ? inducing_spacing : 2.0 * resolution; }
  double grid_margin() const { return margin >= 0.0 ? margin : 2.0 * spacing() + 2.0 * kernel.length_scale; }
  double radius() const { return proxy_radius > 0.0 ? proxy_radius : 0.5 * kernel.length_scale; }

  void validate() const {
    kernel.validate();
    cg.validate();
    if (!(resolution > 0.0)) throw InvalidArgument("GpgMapOptions: resolution must be positive");
    if (!(mask_threshold >= 0.0 && mask_threshold <= 1.0)) throw InvalidArgument("GpgMapOptions: mask_threshold must be in [0, 1]");
  }
};

/// Submap as pose, cloud, elevation I, variance V, gradient G, validity mask and features.
struct GpgMap {
  int id = 0;
  Pose3 pose;
  PointCloud cloud;
  Aabb bounds;  ///< x-y box of the cloud in the local frame
  Raster<double> elevation;
  Raster<double> variance;
  Raster<double> gradient;
  Raster<std::uint8_t> mask;
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
  int dropped_keypoints = 0;
  CgStats cg;
  std::optional<BowVector> bow;
};

/// Raster covering `box` with pixel centres on multiples of `resolution`.
inline Raster<double> raster_over(const Aabb& box, double resolution) {
  const double ox = std::floor(box.min.x() / resolution) * resolution;
  const double oy = std::floor(box.min.y() / resolution) * resolution;
  const int w = static_cast<int>(std::floor((box.max.x() - ox) / resolution + 1e-9)) + 1;
  const int h = static_cast<int>(std::floor((box.max.y() - oy) / resolution + 1e-9)) + 1;
  return Raster<double>(w, h, ox, oy, resolution, 0.0);
}

/// Fits SKI to the cloud and rasterizes mean, variance proxy and gradient magnitude
/// over the cloud box, then extracts features on the masked gradient image.
inline GpgMap build_gpgmap(int id, const Pose3& pose, const PointCloud& cloud, const GpgMapOptions& opt) {
  opt.validate();
  if (cloud.points.empty()) throw InvalidArgument("build_gpgmap: empty cloud");

  GpgMap m;
  m.id = id;
  m.pose = pose;
  m.cloud = cloud;
  m.bounds = bounds_xy(cloud.points);

  std::vector<Vec2> xs;
  std::vector<double> zs;
  xs.reserve(cloud.points.size());
  zs.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    xs.emplace_back(p.x(), p.y());
    zs.push_back(p.z());
  }

  m.elevation = raster_over(m.bounds, opt.resolution);
  Aabb cover = m.bounds;
  cover.extend(Vec2(m.elevation.origin_x, m.elevation.origin_y));
  cover.extend(Vec2(m.elevation.origin_x + opt.resolution * (m.elevation.width - 1),
                    m.elevation.origin_y + opt.resolution * (m.elevation.height - 1)));
  const InducingGrid grid = build_grid(cover, opt.spacing(), opt.grid_margin());
  const SkiModel model = fit_ski(xs, zs, opt.kernel, grid, opt.cg);
  m.cg = model.cg_stats();

  m.variance = Raster<double>::like(m.elevation);
  m.gradient = Raster<double>::like(m.elevation);
  m.mask = Raster<std::uint8_t>::like(m.elevation, 0);
  const double threshold = opt.mask_threshold * opt.kernel.signal_variance();
  const double radius = opt.radius();
  for (int v = 0; v < m.elevation.height; ++v) {
    for (int u = 0; u < m.elevation.width; ++u) {
      const Vec2 x(m.elevation.origin_x + opt.resolution * u, m.elevation.origin_y + opt.resolution * v);
      const SkiPrediction p = model.predict(x);
      const VarianceProxy vp = model.variance_proxy(x, radius);
      m.elevation.at(u, v) = p.mean;
      m.gradient.at(u, v) = gradient_magnitude(p.gradient.x(), p.gradient.y());
      m.variance.at(u, v) = vp.variance;
      m.mask.at(u, v) = vp.confidence >= threshold ? 1 : 0;
    }
  }

  const DescriptorResult f = extract_features(m.gradient, &m.mask, opt.sift);
  m.keypoints = f.keypoints;
  m.descriptors = f.descriptors;
  m.dropped_keypoints = f.dropped;
  return m;
}

}  // namespace gpgm
