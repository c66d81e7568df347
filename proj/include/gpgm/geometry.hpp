#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gpgm/error.hpp"

namespace gpgm {

using Point3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct PointCloud {
  std::vector<Point3> points;
  std::string frame_id;

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }
};

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Rigid 3D transform stored as unit quaternion plus translation.
class Pose3 {
 public:
  Pose3() : rotation_(Eigen::Quaterniond::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose3(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : rotation_(q.normalized()), translation_(t) {}

  static Pose3 identity() { return {}; }
  static Pose3 from_translation(double x, double y, double z) {
    return {Eigen::Quaterniond::Identity(), Eigen::Vector3d(x, y, z)};
  }
  static Pose3 from_yaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), t};
  }
  /// Builds from a 4x4 homogeneous matrix; the rotation block is re-orthonormalized via the quaternion.
  static Pose3 from_matrix(const Eigen::Matrix4d& m) {
    Eigen::Quaterniond q(Eigen::Matrix3d(m.topLeftCorner<3, 3>()));
    return {q, m.topRightCorner<3, 1>()};
  }

  const Eigen::Quaterniond& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  double yaw() const {
    const Eigen::Matrix3d r = rotation_matrix();
    return std::atan2(r(1, 0), r(0, 0));
  }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }

  Pose3 inverse() const {
    const Eigen::Quaterniond qi = rotation_.conjugate();
    return {qi, -(qi * translation_)};
  }

  /// this * other: applies `other` first, then `this`.
  Pose3 operator*(const Pose3& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

inline Pose3 compose(const Pose3& a, const Pose3& b) { return a * b; }
inline Pose3 invert(const Pose3& p) { return p.inverse(); }
inline Point3 apply(const Pose3& p, const Point3& pt) { return p.apply(pt); }

/// Planar rigid transform. Units of the translation depend on context (pixels or meters).
struct Pose2 {
  double theta = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Pose2() = default;
  Pose2(double th, double x, double y) : theta(normalize_angle(th)), tx(x), ty(y) {}

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty};
  }
  Pose2 inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {-theta, -(c * tx + s * ty), -(-s * tx + c * ty)};
  }
};

/// Axis-aligned box in the x-y plane.
struct Aabb {
  Vec2 min{0.0, 0.0};
  Vec2 max{0.0, 0.0};

  Aabb() = default;
  Aabb(const Vec2& lo, const Vec2& hi) : min(lo), max(hi) {
    if (lo.x() > hi.x() || lo.y() > hi.y()) throw InvalidArgument("Aabb: min must not exceed max");
  }

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  double area() const { return width() * height(); }
  bool contains(const Vec2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  Aabb inflated(double dx, double dy) const {
    return {min - Vec2(dx, dy), max + Vec2(dx, dy)};
  }
  void extend(const Vec2& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

/// Bounding box of the x-y coordinates of a cloud. Throws on an empty cloud.
inline Aabb bounds_xy(std::span<const Point3> pts) {
  if (pts.empty()) throw InvalidArgument("bounds_xy: empty point set");
  Aabb box(pts.front().head<2>(), pts.front().head<2>());
  for (const auto& p : pts) box.extend(p.head<2>());
  return box;
}

/// Box of a local rectangle after a planar rigid motion (yaw and x-y translation of `pose`).
inline Aabb transformed_box(const Aabb& local, const Pose3& pose) {
  const Vec2 corners[4] = {local.min, {local.max.x(), local.min.y()}, local.max, {local.min.x(), local.max.y()}};
  Aabb out;
  bool first = true;
  for (const auto& c : corners) {
    const Vec2 w = pose.apply(Point3(c.x(), c.y(), 0.0)).head<2>();
    if (first) {
      out = Aabb(w, w);
      first = false;
    } else {
      out.extend(w);
    }
  }
  return out;
}

/// Intersection over union of two boxes; 0 when the union has no area.
inline double aabb_iou(const Aabb& a, const Aabb& b) {
  const double ix = std::max(0.0, std::min(a.max.x(), b.max.x()) - std::max(a.min.x(), b.min.x()));
  const double iy = std::max(0.0, std::min(a.max.y(), b.max.y()) - std::max(a.min.y(), b.min.y()));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Static k-d tree over `Dim`-dimensional points. Query results are returned in
/// ascending index order so they match an exhaustive scan exactly.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;
  explicit KdTree(std::vector<Point> pts) : points_(std::move(pts)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (!points_.empty()) root_ = build(0, static_cast<int>(order_.size()), 0);
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  std::vector<int> radius_query(const Point& center, double radius) const {
    if (!(radius > 0.0)) throw InvalidArgument("radius_query: radius must be positive");
    std::vector<int> out;
    if (root_ >= 0) radius_rec(root_, center, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Index of the closest point; ties resolve to the lowest index.
  int nearest(const Point& center) const {
    if (root_ < 0) throw InvalidArgument("nearest: empty tree");
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_rec(root_, center, best, best_d2);
    return best;
  }

 private:
  struct Node {
    int begin, end;       // range in order_
    int axis = -1;        // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  static constexpr int kLeafSize = 8;

  int build(int begin, int end, int depth) {
    Node node{begin, end};
    if (end - begin > kLeafSize) {
      Point lo = points_[order_[begin]], hi = lo;
      for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
      }
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      const int mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double pa = points_[a][axis], pb = points_[b][axis];
        return pa < pb || (pa == pb && a < b);
      });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      const int self = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      const int l = build(begin, mid, depth + 1);
      const int r = build(mid, end, depth + 1);
      nodes_[self].left = l;
      nodes_[self].right = r;
      return self;
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void radius_rec(int ni, const Point& c, double r2, std::vector<int>& out) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int idx = order_[i];
        if ((points_[idx] - c).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    const double d = c[n.axis] - n.split;
    // Points equal to the split value may live on either side.
    if (d <= 0.0 || d * d <= r2) radius_rec(n.left, c, r2, out);
    if (d >= 0.0 || d * d <= r2) radius_rec(n.right, c, r2, out);
  }

  void nearest_rec(int ni, const Point& c, int& best, double& best_d2) const {
    const Node& n = nodes_[ni];
    if (n.axis < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int idx = order_[i];
        const double d2 = (points_[idx] - c).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
          best_d2 = d2;
          best = idx;
        }
      }
      return;
    }
    const double d = c[n.axis] - n.split;
    const int first = d <= 0.0 ? n.left : n.right;
    const int second = d <= 0.0 ? n.right : n.left;
    nearest_rec(first, c, best, best_d2);
    if (d * d <= best_d2) nearest_rec(second, c, best, best_d2);
  }

  std::vector<Point> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

inline KdTree2 make_xy_tree(std::span<const Point3> pts) {
  std::vector<Vec2> xy;
  xy.reserve(pts.size());
  for (const auto& p : pts) xy.push_back(p.head<2>());
  return KdTree2(std::move(xy));
}

}  // namespace gpgm
