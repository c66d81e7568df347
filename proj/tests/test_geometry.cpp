#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "gpgm/geometry.hpp"
#include "test_util.hpp"

using namespace gpgm;

TEST(Pose3, IdentityIsNeutral) {
  std::mt19937_64 rng(1);
  const Pose3 p = test::random_pose(rng);
  EXPECT_TRUE(test::pose_near(compose(Pose3::identity(), p), p, 1e-15));
  EXPECT_TRUE(test::pose_near(compose(p, Pose3::identity()), p, 1e-15));
}

TEST(Pose3, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose3 p = test::random_pose(rng);
    EXPECT_TRUE(test::pose_near(compose(p, invert(p)), Pose3::identity(), 1e-12));
    EXPECT_TRUE(test::pose_near(invert(invert(p)), p, 1e-12));
  }
}

TEST(Pose3, RotationThenTranslationHandComputed) {
  const Pose3 rz = Pose3::from_yaw(std::numbers::pi / 2);
  const Pose3 t = Pose3::from_translation(1, 0, 0);
  const Point3 out = apply(compose(rz, t), Point3::Zero());
  EXPECT_NEAR(out.x(), 0.0, 1e-15);
  EXPECT_NEAR(out.y(), 1.0, 1e-15);
  EXPECT_NEAR(out.z(), 0.0, 1e-15);
}

TEST(Pose3, InverseOfTranslation) {
  const Pose3 inv = invert(Pose3::from_translation(1, 2, 3));
  EXPECT_TRUE(test::pose_near(inv, Pose3::from_translation(-1, -2, -3), 0.0));
  EXPECT_TRUE(test::pose_near(invert(Pose3::identity()), Pose3::identity(), 0.0));
}

TEST(Pose3, ApplyRotZ180) {
  const Point3 p = apply(Pose3::from_yaw(std::numbers::pi), Point3(1, 0, 0));
  EXPECT_NEAR(p.x(), -1.0, 1e-15);
  EXPECT_NEAR(p.y(), 0.0, 1e-15);
}

TEST(Pose3, AssociativeAndDistancePreserving) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Pose3 a = test::random_pose(rng), b = test::random_pose(rng), c = test::random_pose(rng);
    EXPECT_TRUE(test::pose_near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-10));
    const Point3 p(g(rng), g(rng), g(rng)), q(g(rng), g(rng), g(rng));
    EXPECT_NEAR((apply(a, p) - apply(a, q)).norm(), (p - q).norm(), 1e-12);
  }
  EXPECT_NEAR(Pose3::from_matrix(Pose3::from_yaw(0.3).matrix()).yaw(), 0.3, 1e-15);
}

TEST(Pose2, NormalizationAndInverse) {
  EXPECT_DOUBLE_EQ(Pose2(-std::numbers::pi, 0, 0).theta, std::numbers::pi);
  EXPECT_NEAR(Pose2(3 * std::numbers::pi, 0, 0).theta, std::numbers::pi, 1e-12);
  const Pose2 p(0.7, 3.0, -2.0);
  const Vec2 x(1.5, 4.0);
  EXPECT_LT((p.inverse().apply(p.apply(x)) - x).norm(), 1e-12);
}

TEST(Aabb, Iou) {
  const Aabb unit({0, 0}, {1, 1});
  EXPECT_DOUBLE_EQ(aabb_iou(unit, unit), 1.0);
  EXPECT_DOUBLE_EQ(aabb_iou(unit, Aabb({2, 2}, {3, 3})), 0.0);
  EXPECT_NEAR(aabb_iou(unit, Aabb({0.5, 0}, {1.5, 1})), 1.0 / 3.0, 1e-15);
  const Aabb line({0, 0}, {1, 0});
  EXPECT_DOUBLE_EQ(aabb_iou(line, line), 0.0);
  EXPECT_THROW(Aabb({1, 0}, {0, 1}), InvalidArgument);
}

TEST(Aabb, IouSymmetric) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 5), w(0.1, 3);
  for (int i = 0; i < 500; ++i) {
    const Vec2 a0(u(rng), u(rng)), b0(u(rng), u(rng));
    const Aabb a(a0, a0 + Vec2(w(rng), w(rng))), b(b0, b0 + Vec2(w(rng), w(rng)));
    EXPECT_EQ(aabb_iou(a, b), aabb_iou(b, a));
    EXPECT_DOUBLE_EQ(aabb_iou(a, a), 1.0);
    const double v = aabb_iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

namespace {

std::vector<int> brute_radius(const std::vector<Vec2>& pts, const Vec2& c, double r) {
  std::vector<int> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if ((pts[i] - c).squaredNorm() <= r * r) out.push_back(static_cast<int>(i));
  return out;
}

int brute_nearest(const std::vector<Vec2>& pts, const Vec2& c) {
  int best = -1;
  double bd = 1e300;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - c).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

TEST(KdTree, RadiusMatchesExhaustiveScan) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto pts = test::random_xy(rng, 1000, -10, 10);
    // Duplicates and collinear points stress the split handling.
    for (int i = 0; i < 50; ++i) pts.push_back(pts[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 30; ++i) pts.emplace_back(1.0, 0.1 * i);
    const KdTree2 tree(pts);
    std::uniform_real_distribution<double> u(-11, 11), r(0.01, 4);
    for (int q = 0; q < 300; ++q) {
      const Vec2 c(u(rng), u(rng));
      const double rad = r(rng);
      EXPECT_EQ(tree.radius_query(c, rad), brute_radius(pts, c, rad));
      EXPECT_EQ(tree.nearest(c), brute_nearest(pts, c));
    }
  }
}

TEST(KdTree, EdgeCases) {
  const std::vector<Vec2> pts = {{0, 0}, {1, 0}, {-1, 0}, {3, 3}};
  const KdTree2 tree(pts);
  EXPECT_EQ(tree.radius_query(Vec2(1, 0), 1e-12), std::vector<int>{1});
  EXPECT_TRUE(tree.radius_query(Vec2(0.5, 2.0), 0.1).empty());
  EXPECT_EQ(tree.nearest(Vec2(3, 3)), 3);
  // (1,0) and (-1,0) are equidistant from the origin-shifted query; lowest index wins.
  EXPECT_EQ(KdTree2(std::vector<Vec2>{{1, 0}, {-1, 0}}).nearest(Vec2(0, 0)), 0);
  EXPECT_EQ(KdTree2(std::vector<Vec2>{{-1, 0}, {1, 0}}).nearest(Vec2(0, 0)), 0);
  EXPECT_THROW(KdTree2().nearest(Vec2(0, 0)), InvalidArgument);
  EXPECT_THROW(tree.radius_query(Vec2(0, 0), 0.0), InvalidArgument);
}

TEST(KdTree, ThreeDimensionalNearest) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Eigen::Vector3d> pts(500);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  const KdTree3 tree(pts);
  for (int q = 0; q < 200; ++q) {
    const Eigen::Vector3d c(u(rng), u(rng), u(rng));
    int best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if ((pts[i] - c).squaredNorm() < (pts[static_cast<std::size_t>(best)] - c).squaredNorm()) best = static_cast<int>(i);
    EXPECT_EQ(tree.nearest(c), best);
  }
}
