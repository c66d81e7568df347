#include <gtest/gtest.h>

#include "gpgm/pipeline.hpp"
#include "test_util.hpp"

using namespace gpgm;

TEST(Config, RoundTripIsLossless) {
  PipelineConfig c;
  c.seed = 0xfeedfacecafebeefULL;
  c.gpgmap.kernel.length_scale = 0.1 + 1e-17;
  c.gpgmap.resolution = 1.0 / 3.0;
  c.synth.waypoints = {{0.1, 0.2}, {3.0, -4.0}};
  c.match.strategy.kind = MatchKind::kRatio;
  c.match.max_icp_rmse = 0.25;
  c.bench.ski_n = {10, 20};
  const auto j = config_to_json(c);
  const auto back = config_from_json(io::Json::parse(j.dump()));
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.gpgmap.resolution, c.gpgmap.resolution);
  EXPECT_EQ(back.match.strategy.kind, MatchKind::kRatio);
}

TEST(Config, DefaultsCarryStatedConstants) {
  const PipelineConfig c = config_from_json(io::Json::object());
  EXPECT_EQ(c.match.ransac.min_inliers, 5);
  EXPECT_EQ(c.match.validation.t_db, 2.0);
  EXPECT_EQ(c.match.validation.pass_fraction, 0.7);
  EXPECT_FALSE(std::isfinite(c.match.max_icp_rmse));
}

TEST(Config, PartialOverridesAndErrors) {
  const auto c = config_from_json(io::Json::parse(R"({"seed": 7, "loopclosure": {"min_inliers": 9}})"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.match.ransac.min_inliers, 9);
  EXPECT_EQ(c.match.validation.t_db, 2.0);
  EXPECT_THROW(config_from_json(io::Json::parse(R"({"sed": 7})")), ParseError);
  EXPECT_THROW(config_from_json(io::Json::parse(R"({"loopclosure": {"t_dB": 1}})")), ParseError);
  EXPECT_THROW(config_from_json(io::Json::parse(R"({"synth": {"preset": "none"}})")), ParseError);
  EXPECT_THROW(config_from_json(io::Json::parse(R"({"kernel": {"sigma_f": -1}})")), ParseError);
  EXPECT_THROW(config_from_json(io::Json::parse(R"({"seed": "x"})")), ParseError);
  EXPECT_THROW(config_from_json(io::Json::parse("[]")), ParseError);
}

TEST(Dataset, Figure8PresetHasEnoughSubmaps) {
  const auto ds = make_dataset(PipelineConfig{});
  EXPECT_GE(ds.submaps.size(), 12u);
}

TEST(Parallel, BuildIndependentOfThreadCount) {
  PipelineConfig c;
  c.synth.waypoints = {{0, 0}, {12, 0}};
  c.synth.density = 10;
  const auto ds = make_dataset(c);
  const auto a = build_maps(ds.submaps, c.gpgmap, 1), b = build_maps(ds.submaps, c.gpgmap, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].elevation.values, b[i].elevation.values);
    EXPECT_EQ(a[i].descriptors, b[i].descriptors);
  }
  EXPECT_THROW(parallel_for(4, 3, [](int i) { if (i == 2) throw Error("x"); }), Error);
}

TEST(Odometry, InformationScalesWithStep) {
  SlamSettings s;
  const Matrix6 a = odometry_information(s, Pose3::from_translation(1, 0, 0));
  const Matrix6 b = odometry_information(s, Pose3::from_translation(4, 0, 0));
  EXPECT_NEAR(a(0, 0) / b(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(a(5, 5) / b(5, 5), 4.0, 1e-12);
  EXPECT_EQ(a(2, 2), b(2, 2));
}

TEST(Slam, NoiselessDatasetKeepsOdometry) {
  PipelineConfig c;
  c.synth.odo_sigma_trans = 0.0;
  c.synth.odo_sigma_yaw = 0.0;
  const auto ds = make_dataset(c);
  const auto res = run_slam(ds.submaps, c, 4, true);
  ASSERT_GE(res.loops.size(), 1u);
  for (const auto& l : res.loops) {
    EXPECT_FALSE(l.is_false);
    EXPECT_LT(l.gt_translation_error, 0.1);
  }
  for (const auto& s : ds.submaps) EXPECT_LT((res.graph.pose(s.id).translation() - s.odom_pose.translation()).norm(), 0.1);
  // Every candidate the log mentions has a reason.
  for (const auto& d : res.decisions) EXPECT_FALSE(d["reason"].get<std::string>().empty());
}

TEST(Bench, SlopeOfKnownPowerLaw) {
  std::vector<BenchRow> rows;
  for (int n : {100, 200, 400}) rows.push_back({"x", n, 1e-9 * n * n * n, 0});
  EXPECT_NEAR(loglog_slope(rows, "x"), 3.0, 1e-9);
  EXPECT_THROW(loglog_slope(rows, "y"), InvalidArgument);
}
