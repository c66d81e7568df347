#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpgm/bow.hpp"
#include "gpgm/error.hpp"
#include "gpgm/features.hpp"
#include "gpgm/geometry.hpp"
#include "gpgm/gpgmap.hpp"
#include "gpgm/raster.hpp"

namespace gpgm {

using Matrix6d = Eigen::Matrix<double, 6, 6>;

// ---------------------------------------------------------------------------
// Candidate selection

enum class CandidateSource { kBow, kOverlap };

inline const char* to_string(CandidateSource s) { return s == CandidateSource::kBow ? "bow" : "overlap"; }

struct CandidatePair {
  int id_a = 0;  ///< the new map
  int id_b = 0;  ///< a map already in the database
  CandidateSource source = CandidateSource::kBow;
  double priority = 0.0;  ///< BoW score or IoU
};

/// Where a stored map sits: local cloud box, current pose estimate and planar
/// position variance used to inflate its world box.
struct MapFootprint {
  int id = 0;
  Aabb local_bounds;
  Pose3 pose;
  double var_x = 0.0;
  double var_y = 0.0;

  Aabb world_box(double inflation) const {
    return transformed_box(local_bounds, pose).inflated(inflation * std::sqrt(std::max(var_x, 0.0)),
                                                         inflation * std::sqrt(std::max(var_y, 0.0)));
  }
};

struct CandidateOptions {
  int top_k = 2;
  double iou_threshold = 0.2;
  double inflation = 2.0;
  int exclude_recent = 0;  ///< skip maps whose id is within this distance of the new id

  void validate() const {
    if (top_k < 0) throw InvalidArgument("CandidateOptions: top_k must be >= 0");
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw InvalidArgument("CandidateOptions: iou_threshold must be in [0, 1]");
    if (inflation < 0.0 || exclude_recent < 0) throw InvalidArgument("CandidateOptions: inflation and exclude_recent must be >= 0");
  }
};

/// A stored map that did not enter the queue, with the reason.
struct SkippedCandidate {
  int id_b = 0;
  double bow_score = 0.0;
  int bow_rank = 0;
  double iou = 0.0;
  std::string reason;  ///< "iou" (some overlap, below the threshold), "bow-rank", "recent" or "matched"
};

struct CandidateSelection {
  std::vector<CandidatePair> queue;
  std::vector<SkippedCandidate> skipped;
};

inline std::pair<int, int> unordered_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

/// BoW top-k candidates first, then boxes overlapping the new map's inflated box
/// by more than the IoU threshold. Already matched pairs never re-enter.
inline CandidateSelection select_candidates(const BowDatabase& db, const std::vector<MapFootprint>& footprints,
                                            const std::set<std::pair<int, int>>& matched, const MapFootprint& new_map,
                                            const BowVector& new_bow, const CandidateOptions& opt) {
  opt.validate();
  CandidateSelection sel;
  auto excluded = [&](int id) {
    return id == new_map.id || std::abs(id - new_map.id) <= opt.exclude_recent || matched.count(unordered_key(new_map.id, id)) > 0;
  };

  const std::vector<ScoredMap> ranked = db.query(new_bow, -1, new_map.id);
  std::map<int, std::pair<double, int>> bow_info;  // id -> (score, rank among eligible)
  std::set<int> queued;
  int rank = 0;
  for (const auto& s : ranked) {
    if (excluded(s.id)) continue;
    bow_info[s.id] = {s.score, ++rank};
    if (rank <= opt.top_k && s.score > 0.0) {
      sel.queue.push_back({new_map.id, s.id, CandidateSource::kBow, s.score});
      queued.insert(s.id);
    }
  }

  const Aabb new_box = new_map.world_box(opt.inflation);
  std::vector<CandidatePair> overlap;
  std::map<int, double> ious;
  for (const auto& fp : footprints) {
    if (fp.id == new_map.id) continue;
    const double iou = aabb_iou(new_box, fp.world_box(opt.inflation));
    ious[fp.id] = iou;
    if (excluded(fp.id) || queued.count(fp.id)) continue;
    if (iou > opt.iou_threshold) overlap.push_back({new_map.id, fp.id, CandidateSource::kOverlap, iou});
  }
  std::stable_sort(overlap.begin(), overlap.end(), [](const CandidatePair& a, const CandidatePair& b) { return a.priority > b.priority; });
  for (const auto& c : overlap) {
    sel.queue.push_back(c);
    queued.insert(c.id_b);
  }

  for (const auto& fp : footprints) {
    if (fp.id == new_map.id || queued.count(fp.id)) continue;
    SkippedCandidate s;
    s.id_b = fp.id;
    if (auto it = bow_info.find(fp.id); it != bow_info.end()) s.bow_score = it->second.first, s.bow_rank = it->second.second;
    s.iou = ious[fp.id];
    if (matched.count(unordered_key(new_map.id, fp.id))) s.reason = "matched";
    else if (std::abs(fp.id - new_map.id) <= opt.exclude_recent) s.reason = "recent";
    else s.reason = s.iou > 0.0 ? "iou" : "bow-rank";
    sel.skipped.push_back(std::move(s));
  }
  return sel;
}

// ---------------------------------------------------------------------------
// SE(2) RANSAC

struct PointPair {
  Vec2 src;  ///< pixel in the second image
  Vec2 dst;  ///< pixel in the first image
};

struct RansacOptions {
  int iterations = 2000;
  double inlier_tol_px = 3.0;
  int min_inliers = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1 || !(inlier_tol_px > 0.0) || min_inliers < 2)
      throw InvalidArgument("RansacOptions: iterations >= 1, inlier_tol_px > 0 and min_inliers >= 2 required");
  }
};

struct Se2Fit {
  bool accepted = false;
  Pose2 transform;           ///< dst = R(theta) src + t, pixel units
  std::vector<int> inliers;  ///< indices into the input pairs, ascending
  double rmse_px = 0.0;
};

/// Least-squares rigid transform dst ~ R src + t (closed form from the centred cross-covariance).
inline Pose2 fit_rigid_2d(const std::vector<PointPair>& pairs, const std::vector<int>& idx) {
  if (idx.empty()) throw InvalidArgument("fit_rigid_2d: no pairs");
  Vec2 cs = Vec2::Zero(), cd = Vec2::Zero();
  for (int i : idx) cs += pairs[static_cast<std::size_t>(i)].src, cd += pairs[static_cast<std::size_t>(i)].dst;
  cs /= static_cast<double>(idx.size());
  cd /= static_cast<double>(idx.size());
  double sxx = 0.0, sxy = 0.0;  // sum of dot and cross products
  for (int i : idx) {
    const Vec2 a = pairs[static_cast<std::size_t>(i)].src - cs, b = pairs[static_cast<std::size_t>(i)].dst - cd;
    sxx += a.dot(b);
    sxy += a.x() * b.y() - a.y() * b.x();
  }
  const double th = std::atan2(sxy, sxx);
  const double c = std::cos(th), s = std::sin(th);
  return {th, cd.x() - (c * cs.x() - s * cs.y()), cd.y() - (s * cs.x() + c * cs.y())};
}

namespace lc_detail {

inline std::vector<int> inliers_of(const std::vector<PointPair>& pairs, const Pose2& t, double tol, double* sse = nullptr) {
  std::vector<int> out;
  double e = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double d2 = (t.apply(pairs[i].src) - pairs[i].dst).squaredNorm();
    if (d2 <= tol * tol) {
      out.push_back(static_cast<int>(i));
      e += d2;
    }
  }
  if (sse) *sse = e;
  return out;
}

}  // namespace lc_detail

/// Two-point minimal-sample RANSAC followed by least-squares refinement on the consensus set.
inline Se2Fit ransac_se2(const std::vector<PointPair>& pairs, const RansacOptions& opt = {}) {
  opt.validate();
  Se2Fit fit;
  if (pairs.size() < 2) return fit;
  std::mt19937_64 rng(splitmix64(opt.seed));
  const auto n = pairs.size();
  std::vector<int> best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.iterations; ++it) {
    const std::size_t a = static_cast<std::size_t>(rng() % n);
    std::size_t b = static_cast<std::size_t>(rng() % (n - 1));
    if (b >= a) ++b;
    const Vec2 ds = pairs[b].src - pairs[a].src, dd = pairs[b].dst - pairs[a].dst;
    if (ds.norm() < 1e-9 || dd.norm() < 1e-9) continue;
    const double th = std::atan2(dd.y(), dd.x()) - std::atan2(ds.y(), ds.x());
    const double c = std::cos(th), s = std::sin(th);
    const Vec2& p = pairs[a].src;
    const Pose2 t(th, pairs[a].dst.x() - (c * p.x() - s * p.y()), pairs[a].dst.y() - (s * p.x() + c * p.y()));
    double sse = 0.0;
    std::vector<int> in = lc_detail::inliers_of(pairs, t, opt.inlier_tol_px, &sse);
    if (in.size() > best.size() || (in.size() == best.size() && sse < best_sse)) {
      best = std::move(in);
      best_sse = sse;
    }
  }
  if (best.size() < 2) return fit;

  Pose2 t = fit_rigid_2d(pairs, best);
  for (int round = 0; round < 10; ++round) {
    std::vector<int> in = lc_detail::inliers_of(pairs, t, opt.inlier_tol_px);
    if (in.size() < 2) break;
    const bool same = in == best;
    best = std::move(in);
    t = fit_rigid_2d(pairs, best);
    if (same) break;
  }
  fit.transform = t;
  fit.inliers = best;
  double sse = 0.0;
  for (int i : best) sse += (t.apply(pairs[static_cast<std::size_t>(i)].src) - pairs[static_cast<std::size_t>(i)].dst).squaredNorm();
  fit.rmse_px = best.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(best.size()));
  fit.accepted = static_cast<int>(best.size()) >= opt.min_inliers;
  return fit;
}

// ---------------------------------------------------------------------------
// Elevation consistency

struct Gaussian1 {
  double mu = 0.0;
  double var = 1.0;
};

/// Per-pair elevation difference d_j = I1 - I2 with variance V1 + V2.
struct OffsetSample {
  double diff = 0.0;
  double var = 1.0;
};

/// Inverse-variance weighted mean of the offsets and its posterior variance.
inline Gaussian1 fuse_offsets(const std::vector<OffsetSample>& s) {
  if (s.empty()) throw InvalidArgument("fuse_offsets: no samples");
  double wsum = 0.0, acc = 0.0;
  for (const auto& o : s) {
    if (!(o.var > 0.0)) throw InvalidArgument("fuse_offsets: variances must be positive");
    wsum += 1.0 / o.var;
    acc += o.diff / o.var;
  }
  return {acc / wsum, 1.0 / wsum};
}

/// Keypoint pixel in the first image and its partner in the second.
struct PixelPair {
  Vec2 p1;
  Vec2 p2;
};

inline std::vector<OffsetSample> offset_samples(const Raster<double>& i1, const Raster<double>& v1, const Raster<double>& i2,
                                                const Raster<double>& v2, const std::vector<PixelPair>& pairs) {
  std::vector<OffsetSample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({i1.sample(p.p1.x(), p.p1.y()) - i2.sample(p.p2.x(), p.p2.y()),
                   v1.sample(p.p1.x(), p.p1.y()) + v2.sample(p.p2.x(), p.p2.y())});
  return out;
}

inline Gaussian1 estimate_z_offset(const Raster<double>& i1, const Raster<double>& v1, const Raster<double>& i2,
                                   const Raster<double>& v2, const std::vector<PixelPair>& pairs) {
  if (pairs.empty()) throw InvalidArgument("estimate_z_offset: at least one pair is required");
  return fuse_offsets(offset_samples(i1, v1, i2, v2, pairs));
}

inline double bhattacharyya(const Gaussian1& a, const Gaussian1& b) {
  if (!(a.var > 0.0) || !(b.var > 0.0)) throw InvalidArgument("bhattacharyya: variances must be positive");
  const double d = a.mu - b.mu;
  return 0.25 * std::log(0.25 * (a.var / b.var + b.var / a.var + 2.0)) + 0.25 * d * d / (a.var + b.var);
}

struct ValidationOptions {
  double t_db = 2.0;
  double pass_fraction = 0.7;  ///< accept when the passing fraction is strictly greater

  void validate() const {
    if (!(t_db > 0.0) || !(pass_fraction >= 0.0 && pass_fraction <= 1.0))
      throw InvalidArgument("ValidationOptions: t_db > 0 and pass_fraction in [0, 1] required");
  }
};

struct Validation {
  bool accepted = false;
  double pass_fraction = 0.0;
  Gaussian1 z_off;
  std::vector<double> distances;
};

/// Gate on per-pair Bhattacharyya distances between offset-corrected elevations.
inline Validation validate_offsets(const std::vector<PixelPair>& pairs, const Raster<double>& i1, const Raster<double>& v1,
                                   const Raster<double>& i2, const Raster<double>& v2, const ValidationOptions& opt = {}) {
  opt.validate();
  Validation out;
  if (pairs.empty()) return out;
  out.z_off = estimate_z_offset(i1, v1, i2, v2, pairs);
  int pass = 0;
  for (const auto& p : pairs) {
    const Gaussian1 z1{i1.sample(p.p1.x(), p.p1.y()) - out.z_off.mu, v1.sample(p.p1.x(), p.p1.y())};
    const Gaussian1 z2{i2.sample(p.p2.x(), p.p2.y()), v2.sample(p.p2.x(), p.p2.y())};
    const double d = bhattacharyya(z1, z2);
    out.distances.push_back(d);
    if (d < opt.t_db) ++pass;
  }
  out.pass_fraction = static_cast<double>(pass) / static_cast<double>(pairs.size());
  out.accepted = out.pass_fraction > opt.pass_fraction;
  return out;
}

inline std::vector<PixelPair> inlier_pixel_pairs(const std::vector<PointPair>& pairs, const Se2Fit& fit) {
  std::vector<PixelPair> out;
  for (int i : fit.inliers) out.push_back({pairs[static_cast<std::size_t>(i)].dst, pairs[static_cast<std::size_t>(i)].src});
  return out;
}

inline Validation validate_match(const GpgMap& m1, const GpgMap& m2, const std::vector<PointPair>& pairs, const Se2Fit& fit,
                                 const ValidationOptions& opt = {}) {
  if (!fit.accepted) throw InvalidArgument("validate_match: the SE(2) fit was rejected");
  return validate_offsets(inlier_pixel_pairs(pairs, fit), m1.elevation, m1.variance, m2.elevation, m2.variance, opt);
}

// ---------------------------------------------------------------------------
// 3D composition and refinement

struct RasterGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 1.0;
};

template <typename T>
RasterGeometry geometry_of(const Raster<T>& r) {
  return {r.origin_x, r.origin_y, r.resolution};
}

/// Relative pose mapping points of the first map's frame into the second map's frame,
/// from an SE(2) fit that maps second-image pixels onto first-image pixels and the
/// elevation offset I1 - I2.
inline Pose3 compose_se3(const Pose2& se2, double z_off, const RasterGeometry& g1, const RasterGeometry& g2) {
  if (std::abs(g1.resolution - g2.resolution) > 1e-12 * std::max(g1.resolution, g2.resolution))
    throw InvalidArgument("compose_se3: raster resolutions differ");
  const double r = g1.resolution;
  const Pose3 m = Pose3::from_yaw(se2.theta, Eigen::Vector3d(r * se2.tx, r * se2.ty, z_off));
  const Pose3 to_image2 = Pose3::from_translation(g2.origin_x, g2.origin_y, 0.0);
  const Pose3 from_image1 = Pose3::from_translation(-g1.origin_x, -g1.origin_y, 0.0);
  return to_image2 * m.inverse() * from_image1;
}

/// Inverse of compose_se3 for gravity-aligned poses: returns the pixel SE(2) and z offset.
inline std::pair<Pose2, double> se2_from_pose(const Pose3& t, const RasterGeometry& g1, const RasterGeometry& g2) {
  const Pose3 m = (Pose3::from_translation(-g2.origin_x, -g2.origin_y, 0.0) * t *
                   Pose3::from_translation(g1.origin_x, g1.origin_y, 0.0))
                      .inverse();
  const double r = g1.resolution;
  return {Pose2(m.yaw(), m.translation().x() / r, m.translation().y() / r), m.translation().z()};
}

struct IcpOptions {
  int max_iters = 50;
  double max_corr_dist = 0.5;
  double tol = 1e-6;

  void validate() const {
    if (max_iters < 1 || !(max_corr_dist > 0.0) || !(tol > 0.0))
      throw InvalidArgument("IcpOptions: max_iters >= 1, max_corr_dist > 0 and tol > 0 required");
  }
};

struct IcpResult {
  Pose3 pose;
  double rmse = 0.0;
  double initial_rmse = 0.0;
  int iterations = 0;
  int correspondences = 0;
};

namespace lc_detail {

struct Correspondences {
  std::vector<Point3> a, b;
  double sse = 0.0;
};

inline Correspondences correspond(const std::vector<Point3>& p1, const KdTree3& tree, const Pose3& t, double max_dist) {
  Correspondences c;
  for (const auto& p : p1) {
    const Point3 q = t.apply(p);
    const Point3& n = tree.point(static_cast<std::size_t>(tree.nearest(q)));
    const double d2 = (n - q).squaredNorm();
    if (d2 <= max_dist * max_dist) {
      c.a.push_back(q);
      c.b.push_back(n);
      c.sse += d2;
    }
  }
  return c;
}

}  // namespace lc_detail

/// Point-to-point ICP over x, y, z and yaw: finds T with T * P1 ~ P2, starting at `init`.
inline IcpResult icp_4d(const std::vector<Point3>& p1, const std::vector<Point3>& p2, const Pose3& init, const IcpOptions& opt = {}) {
  opt.validate();
  if (p1.empty() || p2.empty()) throw InvalidArgument("icp_4d: empty cloud");
  if (!init.matrix().allFinite()) throw InvalidArgument("icp_4d: non-finite initial pose");
  const KdTree3 tree(p2);
  IcpResult res;
  Pose3 t = init;
  auto c = lc_detail::correspond(p1, tree, t, opt.max_corr_dist);
  if (c.a.empty()) throw Error("icp_4d: no correspondences at the initial pose");
  res.initial_rmse = std::sqrt(c.sse / static_cast<double>(c.a.size()));
  double best_rmse = res.initial_rmse;
  Pose3 best = t;
  int best_count = static_cast<int>(c.a.size());

  for (int it = 0; it < opt.max_iters; ++it) {
    res.iterations = it + 1;
    Point3 ca = Point3::Zero(), cb = Point3::Zero();
    for (std::size_t i = 0; i < c.a.size(); ++i) ca += c.a[i], cb += c.b[i];
    ca /= static_cast<double>(c.a.size());
    cb /= static_cast<double>(c.a.size());
    double sdot = 0.0, scross = 0.0;
    for (std::size_t i = 0; i < c.a.size(); ++i) {
      const Vec2 a = (c.a[i] - ca).head<2>(), b = (c.b[i] - cb).head<2>();
      sdot += a.dot(b);
      scross += a.x() * b.y() - a.y() * b.x();
    }
    const double yaw = std::atan2(scross, sdot);
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d dt = cb - rz * ca;
    t = Pose3(Eigen::Quaterniond(rz), dt) * t;

    c = lc_detail::correspond(p1, tree, t, opt.max_corr_dist);
    if (c.a.empty()) break;
    const double rmse = std::sqrt(c.sse / static_cast<double>(c.a.size()));
    if (rmse <= best_rmse) {
      best_rmse = rmse;
      best = t;
      best_count = static_cast<int>(c.a.size());
    }
    if (std::abs(yaw) < opt.tol && dt.norm() < opt.tol) break;
  }
  res.pose = best;
  res.rmse = best_rmse;
  res.correspondences = best_count;
  return res;
}

/// Planar RMS radius of a cloud around its centroid.
inline double characteristic_radius(const std::vector<Point3>& pts) {
  if (pts.empty()) return 1.0;
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p.head<2>();
  c /= static_cast<double>(pts.size());
  double s = 0.0;
  for (const auto& p : pts) s += (p.head<2>() - c).squaredNorm();
  const double r = std::sqrt(s / static_cast<double>(pts.size()));
  return r > 0.0 ? r : 1.0;
}

/// Information for [translation; rotation] from the ICP residual: isotropic
/// sigma_t = max(rmse, floor) and sigma_r = sigma_t / radius.
inline Matrix6d information_from_rmse(double rmse, double radius, double floor = 1e-3) {
  if (rmse < 0.0 || !(radius > 0.0) || !(floor > 0.0)) throw InvalidArgument("information_from_rmse: invalid arguments");
  const double st = std::max(rmse, floor), sr = st / radius;
  Matrix6d info = Matrix6d::Zero();
  info.diagonal() << 1 / (st * st), 1 / (st * st), 1 / (st * st), 1 / (sr * sr), 1 / (sr * sr), 1 / (sr * sr);
  return info;
}

// ---------------------------------------------------------------------------
// Full pairwise match

struct MatchOptions {
  MatchStrategy strategy;
  RansacOptions ransac;
  ValidationOptions validation;
  IcpOptions icp;
  double info_floor = 1e-3;
  double max_icp_rmse = std::numeric_limits<double>::infinity();

  void validate() const {
    ransac.validate();
    validation.validate();
    icp.validate();
    if (!(info_floor > 0.0) || !(max_icp_rmse > 0.0)) throw InvalidArgument("MatchOptions: info_floor and max_icp_rmse must be positive");
  }
};

struct MatchResult {
  bool accepted = false;
  std::string reason;  ///< empty when accepted, else the failing stage
  int feature_matches = 0;
  Se2Fit se2;
  Gaussian1 z_off;
  double pass_fraction = 0.0;
  Pose3 relative_pose;  ///< maps first-map frame points into the second map's frame
  Pose3 initial_pose;   ///< composed pose before ICP
  double icp_rmse = 0.0;
  Matrix6d information = Matrix6d::Zero();
};

/// Feature matching, SE(2) RANSAC, Bhattacharyya gate, composition and 4-DoF ICP.
inline MatchResult match_gpgmaps(const GpgMap& m1, const GpgMap& m2, const MatchOptions& opt = {}) {
  opt.validate();
  MatchResult r;
  const auto fm = match_features(m1.descriptors, m2.descriptors, opt.strategy);
  r.feature_matches = static_cast<int>(fm.size());
  std::vector<PointPair> pairs;
  pairs.reserve(fm.size());
  for (const auto& m : fm) {
    const auto& k1 = m1.keypoints[static_cast<std::size_t>(m.first)];
    const auto& k2 = m2.keypoints[static_cast<std::size_t>(m.second)];
    pairs.push_back({Vec2(k2.u, k2.v), Vec2(k1.u, k1.v)});
  }
  r.se2 = ransac_se2(pairs, opt.ransac);
  if (!r.se2.accepted) {
    r.reason = "ransac-inliers";
    return r;
  }
  const Validation v = validate_match(m1, m2, pairs, r.se2, opt.validation);
  r.z_off = v.z_off;
  r.pass_fraction = v.pass_fraction;
  if (!v.accepted) {
    r.reason = "bhattacharyya";
    return r;
  }
  r.initial_pose = compose_se3(r.se2.transform, r.z_off.mu, geometry_of(m1.elevation), geometry_of(m2.elevation));
  try {
    const IcpResult icp = icp_4d(m1.cloud.points, m2.cloud.points, r.initial_pose, opt.icp);
    r.relative_pose = icp.pose;
    r.icp_rmse = icp.rmse;
  } catch (const Error&) {
    r.reason = "icp";
    return r;
  }
  if (r.icp_rmse > opt.max_icp_rmse) {
    r.reason = "icp-rmse";
    return r;
  }
  r.information = information_from_rmse(r.icp_rmse, characteristic_radius(m1.cloud.points), opt.info_floor);
  r.accepted = true;
  return r;
}

}  // namespace gpgm
