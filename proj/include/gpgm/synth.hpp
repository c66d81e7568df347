#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"

namespace gpgm {

struct Bump {
  Vec2 center{0.0, 0.0};
  double amplitude = 0.0;
  double sigma = 1.0;
};

/// Plane z = a x + b y + c plus a sum of isotropic Gaussian bumps.
struct TerrainSpec {
  double a = 0.0, b = 0.0, c = 0.0;
  std::vector<Bump> bumps;
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& bump : bumps)
      if (!(bump.sigma > 0.0)) throw InvalidArgument("TerrainSpec: bump sigma must be positive");
  }
};

struct TerrainSample {
  double z = 0.0;
  double dzdx = 0.0;
  double dzdy = 0.0;
};

/// Closed-form elevation and gradient. Bumps beyond 8 sigma are skipped (contribution < 1e-13 A).
inline TerrainSample terrain_eval(const TerrainSpec& spec, double x, double y) {
  TerrainSample s{spec.a * x + spec.b * y + spec.c, spec.a, spec.b};
  for (const auto& bump : spec.bumps) {
    const double dx = x - bump.center.x(), dy = y - bump.center.y();
    const double r2 = dx * dx + dy * dy, s2 = bump.sigma * bump.sigma;
    if (r2 > 64.0 * s2) continue;
    const double e = bump.amplitude * std::exp(-0.5 * r2 / s2);
    s.z += e;
    s.dzdx -= e * dx / s2;
    s.dzdy -= e * dy / s2;
  }
  return s;
}

/// Stateless 64-bit mixer used to derive independent per-item seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct BumpFieldOptions {
  Aabb region{{-10.0, -10.0}, {10.0, 10.0}};
  double density = 1.0;  ///< bumps per m^2
  double min_amplitude = 0.05, max_amplitude = 0.35;
  double min_sigma = 0.2, max_sigma = 0.8;
};

/// Random bump field; amplitudes take a random sign so the terrain has pits and mounds.
inline TerrainSpec random_bump_field(const BumpFieldOptions& opt, std::uint64_t seed) {
  TerrainSpec spec;
  spec.seed = seed;
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> ux(opt.region.min.x(), opt.region.max.x());
  std::uniform_real_distribution<double> uy(opt.region.min.y(), opt.region.max.y());
  std::uniform_real_distribution<double> ua(opt.min_amplitude, opt.max_amplitude);
  std::uniform_real_distribution<double> us(opt.min_sigma, opt.max_sigma);
  std::bernoulli_distribution sign(0.35);
  const auto count = static_cast<std::size_t>(std::llround(opt.density * opt.region.area()));
  spec.bumps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Bump b;
    b.center = Vec2(ux(rng), uy(rng));
    b.amplitude = ua(rng) * (sign(rng) ? -1.0 : 1.0);
    b.sigma = us(rng);
    spec.bumps.push_back(b);
  }
  return spec;
}

struct SimConfig {
  std::vector<Vec2> waypoints;
  double submap_spacing = 5.0;     ///< m of path between submap triggers
  double half_width = 4.0;         ///< square footprint half side, m
  double density = 40.0;           ///< points per m^2
  double sigma_z = 0.01;           ///< elevation noise std, m
  double odo_sigma_trans = 0.0;    ///< planar translation noise std per sqrt(m)
  double odo_sigma_yaw = 0.0;      ///< yaw noise std (rad) per sqrt(m)
  double speed = 1.0;              ///< m/s, converts arc length to timestamps
  std::uint64_t seed = 0;

  void validate() const {
    if (waypoints.size() < 2) throw InvalidArgument("SimConfig: at least two waypoints are required");
    if (!(submap_spacing > 0.0) || !(half_width > 0.0) || !(density > 0.0) || !(speed > 0.0))
      throw InvalidArgument("SimConfig: spacing, footprint, density and speed must be positive");
    if (sigma_z < 0.0 || odo_sigma_trans < 0.0 || odo_sigma_yaw < 0.0)
      throw InvalidArgument("SimConfig: noise levels must be non-negative");
  }
};

struct SimSubmap {
  int id = 0;
  double timestamp = 0.0;
  Pose3 gt_pose;
  Pose3 odom_pose;
  PointCloud cloud;  ///< in the gravity-aligned local reference frame
};

struct SimDataset {
  TerrainSpec terrain;
  SimConfig config;
  std::vector<SimSubmap> submaps;
};

/// Two stacked square loops sharing their middle edge, which is driven eastwards at
/// the start and westwards at the end.
inline std::vector<Vec2> figure8_waypoints(double side = 10.0) {
  return {{0, 0}, {side, 0}, {side, side}, {0, side}, {0, 0}, {0, -side}, {side, -side}, {side, 0}, {0, 0}};
}

inline SimConfig figure8_preset(std::uint64_t seed) {
  SimConfig cfg;
  cfg.waypoints = figure8_waypoints();
  cfg.submap_spacing = 5.0;
  cfg.half_width = 4.0;
  cfg.density = 40.0;
  cfg.sigma_z = 0.01;
  cfg.odo_sigma_trans = 0.05;
  cfg.odo_sigma_yaw = 0.01;
  cfg.seed = seed;
  return cfg;
}

/// Bump terrain covering the figure-8 preset with room for the footprints.
inline TerrainSpec figure8_terrain(std::uint64_t seed) {
  BumpFieldOptions opt;
  opt.region = Aabb({-6.0, -16.0}, {16.0, 16.0});
  opt.density = 1.2;
  return random_bump_field(opt, seed);
}

namespace detail {

struct PathPoint {
  Vec2 position;
  double heading;
};

inline PathPoint path_at(const std::vector<Vec2>& wp, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < wp.size(); ++i) {
    const Vec2 d = wp[i + 1] - wp[i];
    const double len = d.norm();
    if (len == 0.0) continue;
    const bool last = i + 2 == wp.size();
    if (s < acc + len || last) {
      const double f = std::clamp((s - acc) / len, 0.0, 1.0);
      return {wp[i] + f * d, std::atan2(d.y(), d.x())};
    }
    acc += len;
  }
  throw InvalidArgument("simulate: degenerate path");
}

inline double path_length(const std::vector<Vec2>& wp) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < wp.size(); ++i) len += (wp[i + 1] - wp[i]).norm();
  return len;
}

}  // namespace detail

/// Generates submaps along the waypoint path with a drifting odometry chain.
inline SimDataset simulate(const TerrainSpec& terrain, const SimConfig& cfg) {
  terrain.validate();
  cfg.validate();
  const double length = detail::path_length(cfg.waypoints);
  if (!(length > 0.0)) throw InvalidArgument("simulate: degenerate path");

  SimDataset ds;
  ds.terrain = terrain;
  ds.config = cfg;
  const int count = static_cast<int>(std::floor(length / cfg.submap_spacing + 1e-9)) + 1;
  const bool noiseless = cfg.odo_sigma_trans == 0.0 && cfg.odo_sigma_yaw == 0.0;
  std::mt19937_64 odo_rng(splitmix64(cfg.seed ^ 0x0d0d0d0dULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int k = 0; k < count; ++k) {
    const double s = k * cfg.submap_spacing;
    const detail::PathPoint pp = detail::path_at(cfg.waypoints, s);
    const double ground = terrain_eval(terrain, pp.position.x(), pp.position.y()).z;

    SimSubmap sm;
    sm.id = k;
    sm.timestamp = s / cfg.speed;
    sm.gt_pose = Pose3::from_yaw(pp.heading, Eigen::Vector3d(pp.position.x(), pp.position.y(), ground));

    if (k == 0 || noiseless) {
      sm.odom_pose = sm.gt_pose;
    } else {
      const Pose3& prev_gt = ds.submaps.back().gt_pose;
      const Pose3 rel = prev_gt.inverse() * sm.gt_pose;
      const double step = std::max(rel.translation().head<2>().norm(), 1e-9);
      const double ts = cfg.odo_sigma_trans * std::sqrt(step), ys = cfg.odo_sigma_yaw * std::sqrt(step);
      const double nx = ts * gauss(odo_rng), ny = ts * gauss(odo_rng), nyaw = ys * gauss(odo_rng);
      const Pose3 noise = Pose3::from_yaw(nyaw, Eigen::Vector3d(nx, ny, 0.0));
      sm.odom_pose = ds.submaps.back().odom_pose * rel * noise;
    }

    std::mt19937_64 rng(splitmix64(cfg.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> u(-cfg.half_width, cfg.half_width);
    const auto n = static_cast<std::size_t>(std::llround(cfg.density * 4.0 * cfg.half_width * cfg.half_width));
    const Pose3 world_to_lrf = sm.gt_pose.inverse();
    sm.cloud.frame_id = "submap_" + std::to_string(k);
    sm.cloud.points.reserve(n);
    const double c = std::cos(pp.heading), sn = std::sin(pp.heading);
    for (std::size_t i = 0; i < n; ++i) {
      const double lx = u(rng), ly = u(rng);
      const double wx = pp.position.x() + c * lx - sn * ly;
      const double wy = pp.position.y() + sn * lx + c * ly;
      double z = terrain_eval(terrain, wx, wy).z;
      if (cfg.sigma_z > 0.0) z += cfg.sigma_z * gauss(rng);
      sm.cloud.points.push_back(world_to_lrf.apply(Point3(wx, wy, z)));
    }
    ds.submaps.push_back(std::move(sm));
  }
  return ds;
}

/// Planar position and yaw variances of one odometry step of length `step` (m).
inline Eigen::Matrix<double, 6, 1> odometry_step_variance(const SimConfig& cfg, double step) {
  Eigen::Matrix<double, 6, 1> v;
  const double t2 = cfg.odo_sigma_trans * cfg.odo_sigma_trans * step;
  const double y2 = cfg.odo_sigma_yaw * cfg.odo_sigma_yaw * step;
  v << t2, t2, 0.0, 0.0, 0.0, y2;
  return v;
}

}  // namespace gpgm
