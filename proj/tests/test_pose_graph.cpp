#include <gtest/gtest.h>

#include <random>

#include "gpgm/pose_graph.hpp"
#include "gpgm/synth.hpp"
#include "test_util.hpp"

using namespace gpgm;

namespace {

Vector6d numeric_diff(const PgEdge& e, const Pose3& pi, const Pose3& pj, bool wrt_i, int k, double h) {
  Vector6d d = Vector6d::Zero();
  d[k] = h;
  const Pose3 pi_p = wrt_i ? retract(pi, d) : pi, pj_p = wrt_i ? pj : retract(pj, d);
  const Pose3 pi_m = wrt_i ? retract(pi, -d) : pi, pj_m = wrt_i ? pj : retract(pj, -d);
  return (residual(e, pi_p, pj_p) - residual(e, pi_m, pj_m)) / (2 * h);
}

PoseGraph chain_with_loop(double loop_x) {
  PoseGraph g;
  g.add_node(0, Pose3::identity());
  g.add_node(1, Pose3::from_translation(1, 0, 0));
  g.add_node(2, Pose3::from_translation(2, 0, 0));
  g.add_edge({0, 1, Pose3::from_translation(1, 0, 0), Matrix6::Identity(), EdgeKind::kOdometry});
  g.add_edge({1, 2, Pose3::from_translation(1, 0, 0), Matrix6::Identity(), EdgeKind::kOdometry});
  g.add_edge({0, 2, Pose3::from_translation(loop_x, 0, 0), Matrix6::Identity(), EdgeKind::kLoop});
  return g;
}

}  // namespace

TEST(Residual, ZeroWhenConsistent) {
  std::mt19937_64 rng(1);
  const Pose3 a = test::random_pose(rng), b = test::random_pose(rng);
  const PgEdge e{0, 1, a.inverse() * b};
  EXPECT_LT(residual(e, a, b).norm(), 1e-12);
}

TEST(Residual, PureTranslationDiscrepancy) {
  const PgEdge e{0, 1, Pose3::from_translation(1, 0, 0)};
  const Vector6d r = residual(e, Pose3::identity(), Pose3::from_translation(1.1, 0, 0));
  EXPECT_NEAR(std::abs(r[0]), 0.1, 1e-12);
  EXPECT_NEAR(r.tail<5>().norm(), 0.0, 1e-12);
}

TEST(Residual, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Pose3 a = test::random_pose(rng), b = test::random_pose(rng), z = test::random_pose(rng);
    const PgEdge e{0, 1, z};
    Matrix6 ji, jj;
    residual_jacobians(e, a, b, ji, jj);
    for (int k = 0; k < 6; ++k) {
      const Vector6d ni = numeric_diff(e, a, b, true, k, 1e-6), nj = numeric_diff(e, a, b, false, k, 1e-6);
      EXPECT_LT((ni - ji.col(k)).norm(), 1e-5 * std::max(1.0, ni.norm())) << "i col " << k;
      EXPECT_LT((nj - jj.col(k)).norm(), 1e-5 * std::max(1.0, nj.norm())) << "j col " << k;
    }
  }
}

TEST(Optimize, ConsistentGraphUnchanged) {
  auto g = chain_with_loop(2.0);
  const auto rep = optimize(g);
  EXPECT_EQ(rep.final_cost, 0.0);
  EXPECT_TRUE(test::pose_near(g.pose(2), Pose3::from_translation(2, 0, 0), 0.0));
}

TEST(Optimize, ThreeNodeContradictionMatchesOracle) {
  auto g = chain_with_loop(2.3);
  const auto rep = optimize(g, {100, 1e-4, 1e-15});
  // Linear least squares in x1, x2 with x0 = 0: (x1-1)^2 + (x2-x1-1)^2 + (x2-2.3)^2.
  Eigen::Matrix2d a;
  a << 2, -1, -1, 2;
  const Eigen::Vector2d x = a.ldlt().solve(Eigen::Vector2d(0, 3.3));
  const double oracle = std::pow(x[0] - 1, 2) + std::pow(x[1] - x[0] - 1, 2) + std::pow(x[1] - 2.3, 2);
  EXPECT_NEAR(rep.final_cost, oracle, 1e-6);
  EXPECT_NEAR(oracle, 0.03, 1e-12);
  EXPECT_NEAR(g.pose(1).translation().x(), x[0], 1e-6);
  EXPECT_NEAR(g.pose(2).translation().x(), x[1], 1e-6);
  EXPECT_TRUE(test::pose_near(g.pose(0), Pose3::identity(), 0.0));
  EXPECT_LE(rep.final_cost, rep.initial_cost);
}

TEST(Optimize, GaugeInvariance) {
  std::mt19937_64 rng(4);
  PoseGraph g;
  std::vector<Pose3> poses;
  for (int k = 0; k < 6; ++k) poses.push_back(test::random_pose(rng));
  for (int k = 0; k < 6; ++k) g.add_node(k, poses[static_cast<std::size_t>(k)]);
  for (int k = 0; k + 1 < 6; ++k) g.add_edge({k, k + 1, test::random_pose(rng), Matrix6::Identity(), EdgeKind::kOdometry});
  g.add_edge({0, 4, test::random_pose(rng), Matrix6::Identity() * 2.0, EdgeKind::kLoop});
  const Pose3 w = test::random_pose(rng);
  PoseGraph moved;
  for (int k = 0; k < 6; ++k) moved.add_node(k, w * poses[static_cast<std::size_t>(k)]);
  for (const auto& e : g.edges()) moved.add_edge(e);
  EXPECT_NEAR(graph_cost(g), graph_cost(moved), 1e-8 * std::max(1.0, graph_cost(g)));
  optimize(g);
  optimize(moved);
  EXPECT_NEAR(graph_cost(g), graph_cost(moved), 1e-8 * std::max(1.0, graph_cost(g)));
}

TEST(Optimize, DriftedTrajectoryImproves) {
  const auto ds = simulate(figure8_terrain(3), [] {
    auto c = figure8_preset(3);
    c.density = 1.0;
    c.odo_sigma_trans = 0.1;
    c.odo_sigma_yaw = 0.03;
    return c;
  }());
  PoseGraph g;
  const auto& sm = ds.submaps;
  for (const auto& s : sm) g.add_node(s.id, s.odom_pose);
  Matrix6 info = Matrix6::Identity();
  info.diagonal() << 1 / 0.05, 1 / 0.05, 1e4, 1e4, 1e4, 1 / 0.005;
  for (std::size_t k = 1; k < sm.size(); ++k)
    g.add_edge({sm[k - 1].id, sm[k].id, sm[k - 1].odom_pose.inverse() * sm[k].odom_pose, info, EdgeKind::kOdometry});
  const int a = 0, b = static_cast<int>(sm.size()) - 1;
  g.add_edge({a, b, sm[0].gt_pose.inverse() * sm.back().gt_pose, Matrix6::Identity() * 1e4, EdgeKind::kLoop});
  auto rmse = [&](const PoseGraph& gr) {
    double s = 0;
    for (const auto& x : sm) s += (gr.pose(x.id).translation() - x.gt_pose.translation()).squaredNorm();
    return std::sqrt(s / static_cast<double>(sm.size()));
  };
  const double before = rmse(g);
  const auto rep = optimize(g);
  EXPECT_LT(rmse(g), before);
  EXPECT_LT(rep.final_cost, rep.initial_cost);
  const auto cov = marginal_covariances(g);
  EXPECT_EQ(cov[0], Matrix6::Zero());
  EXPECT_GT(cov[5](0, 0), 0.0);
}

TEST(Optimize, Errors) {
  PoseGraph g;
  g.add_node(0, Pose3::identity());
  g.add_node(1, Pose3::identity());
  g.add_node(2, Pose3::identity());
  g.add_edge({0, 1});
  EXPECT_THROW(optimize(g), InvalidArgument);
  EXPECT_THROW(g.add_edge({1, 1}), InvalidArgument);
  EXPECT_THROW(g.add_edge({1, 7}), InvalidArgument);
  EXPECT_THROW(g.add_node(1, Pose3::identity()), InvalidArgument);
  Matrix6 bad = Matrix6::Identity();
  bad(0, 0) = -1;
  EXPECT_THROW(g.add_edge({1, 2, Pose3::identity(), bad}), InvalidArgument);
}
