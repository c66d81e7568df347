#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpgm/eval.hpp"
#include "test_util.hpp"

using namespace gpgm;

namespace {

Trajectory random_walk(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Trajectory t;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    p += Eigen::Vector3d(g(rng), g(rng), 0.2 * g(rng));
    t.points.push_back({static_cast<double>(i), p, Eigen::Quaterniond::Identity()});
  }
  return t;
}

}  // namespace

TEST(Align, IdentityAndRigidRotation) {
  std::mt19937_64 rng(1);
  const auto gt = random_walk(rng, 30);
  EXPECT_LT(evaluate_trajectory(gt, gt).rmse, 1e-12);

  Trajectory est = gt;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(0.2, 0.3, 1).normalized()).toRotationMatrix();
  for (auto& p : est.points) p.p = r * (p.p - gt.points[0].p) + gt.points[0].p + Eigen::Vector3d(5, -3, 1);
  const auto m = evaluate_trajectory(est, gt);
  EXPECT_LT(m.rmse, 1e-9);
  EXPECT_EQ(m.n_correspondences, 30);
}

TEST(Align, NoiseBand) {
  int within = 0;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s));
    const auto gt = random_walk(rng, 50);
    const double sigma = 0.1;
    std::normal_distribution<double> g(0.0, sigma / std::sqrt(3.0));
    Trajectory est = gt;
    for (auto& p : est.points) p.p += Eigen::Vector3d(g(rng), g(rng), g(rng));
    const double e = evaluate_trajectory(est, gt).rmse;
    if (e >= 0.5 * sigma && e <= 2.0 * sigma) ++within;
  }
  EXPECT_GE(within, 95);
}

TEST(Align, RotationNeverWorseThanTranslationOnly) {
  std::mt19937_64 rng(4);
  for (int s = 0; s < 20; ++s) {
    const auto gt = random_walk(rng, 20);
    auto est = random_walk(rng, 20);
    const auto full = align(est, gt, true), trans = align(est, gt, false);
    EXPECT_LE(trajectory_metrics(full.aligned, gt, full.pairs).rmse, trajectory_metrics(trans.aligned, gt, trans.pairs).rmse + 1e-12);
  }
}

TEST(Align, CorrespondenceWindowAndErrors) {
  Trajectory gt, est;
  for (int i = 0; i < 5; ++i) gt.points.push_back({static_cast<double>(i), Eigen::Vector3d(i, 0, 0)});
  for (int i = 0; i < 5; ++i) est.points.push_back({i + (i % 2 ? 0.2 : 0.01), Eigen::Vector3d(i, 0, 0)});
  EXPECT_EQ(associate(est, gt).size(), 3u);
  est.points.resize(2);
  EXPECT_THROW(align(est, gt), InvalidArgument);
  Trajectory bad = gt;
  bad.points[2].t = 0.5;
  EXPECT_THROW(associate(bad, gt), InvalidArgument);
}

TEST(Metrics, ConstantOffsetAndHandFixture) {
  Trajectory gt, est;
  for (int i = 0; i < 4; ++i) gt.points.push_back({static_cast<double>(i), Eigen::Vector3d(i, 0, 0)});
  est = gt;
  for (auto& p : est.points) p.p.y() += 0.5;
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const auto m = trajectory_metrics(est, gt, pairs);
  EXPECT_DOUBLE_EQ(m.rmse, 0.5);
  EXPECT_DOUBLE_EQ(m.final_error, 0.5);
  EXPECT_DOUBLE_EQ(m.rmse_pct, 100.0 * 0.5 / 3.0);

  // Errors 0, 3, 4 over a path of length 2: rmse = sqrt(25/3).
  Trajectory g3, e3;
  for (int i = 0; i < 3; ++i) g3.points.push_back({static_cast<double>(i), Eigen::Vector3d(i, 0, 0)});
  e3 = g3;
  e3.points[1].p += Eigen::Vector3d(0, 3, 0);
  e3.points[2].p += Eigen::Vector3d(0, 0, 4);
  const auto m3 = trajectory_metrics(e3, g3, {{0, 0}, {1, 1}, {2, 2}});
  EXPECT_NEAR(m3.rmse, std::sqrt(25.0 / 3.0), 1e-12);
  EXPECT_DOUBLE_EQ(m3.final_error, 4.0);
  EXPECT_DOUBLE_EQ(m3.max_err_pct, 200.0);
}

TEST(Metrics, InvariantUnderCommonRigidMotion) {
  std::mt19937_64 rng(6);
  const auto gt = random_walk(rng, 25);
  auto est = random_walk(rng, 25);
  const double base = evaluate_trajectory(est, gt).rmse;
  const Pose3 w = test::random_pose(rng);
  Trajectory gt2 = gt, est2 = est;
  for (auto& p : gt2.points) p.p = w.apply(p.p);
  for (auto& p : est2.points) p.p = w.apply(p.p);
  EXPECT_NEAR(evaluate_trajectory(est2, gt2).rmse, base, 1e-9);
}

TEST(PrRoc, PerfectSeparation) {
  const auto c = pr_roc({0.9, 0.8, 0.3, 0.1}, {true, true, false, false});
  EXPECT_DOUBLE_EQ(c.roc_auc, 1.0);
  for (const auto& p : c.pr)
    if (p.recall > 0.0 && p.recall <= 1.0 && p.threshold >= 0.8) EXPECT_EQ(p.precision, 1.0);
}

TEST(PrRoc, HandTabulated) {
  // Scores 0.9(+) 0.7(-) 0.6(+) 0.2(-).
  const auto c = pr_roc({0.6, 0.9, 0.2, 0.7}, {true, true, false, false});
  ASSERT_EQ(c.pr.size(), 4u);
  EXPECT_DOUBLE_EQ(c.pr[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(c.pr[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(c.pr[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(c.pr[1].recall, 0.5);
  EXPECT_NEAR(c.pr[2].precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.pr[2].recall, 1.0);
  EXPECT_DOUBLE_EQ(c.pr[3].precision, 0.5);
  EXPECT_DOUBLE_EQ(c.roc_auc, 0.75);
  EXPECT_THROW(pr_roc({0.1, 0.2}, {true, true}), InvalidArgument);
}

TEST(PrRoc, RandomLabelsNearHalf) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s;
  std::vector<bool> l;
  for (int i = 0; i < 5000; ++i) s.push_back(u(rng)), l.push_back(u(rng) < 0.3);
  const auto c = pr_roc(s, l);
  EXPECT_GT(c.roc_auc, 0.4);
  EXPECT_LT(c.roc_auc, 0.6);
}
