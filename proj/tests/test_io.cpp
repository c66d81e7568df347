#include <gtest/gtest.h>

#include <random>

#include "gpgm/io.hpp"
#include "test_util.hpp"

using namespace gpgm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gpgm_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Base64, KnownVectorsAndRoundTrip) {
  const std::string man = "Man", ma = "Ma", m = "M";
  EXPECT_EQ(io::base64_encode(reinterpret_cast<const std::uint8_t*>(man.data()), 3), "TWFu");
  EXPECT_EQ(io::base64_encode(reinterpret_cast<const std::uint8_t*>(ma.data()), 2), "TWE=");
  EXPECT_EQ(io::base64_encode(reinterpret_cast<const std::uint8_t*>(m.data()), 1), "TQ==");
  std::mt19937_64 rng(1);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(io::base64_decode(io::base64_encode(bytes.data(), n)), bytes);
  }
  EXPECT_THROW(io::base64_decode("abc"), ParseError);
  EXPECT_THROW(io::base64_decode("ab!d"), ParseError);
}

TEST(Cloud, RoundTripIsExact) {
  std::mt19937_64 rng(2);
  PointCloud c;
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) c.points.emplace_back(u(rng) / 3.0, u(rng) * 1e-7, u(rng) * 1e5);
  const PointCloud back = io::cloud_from_csv(io::cloud_to_csv(c));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back.points[i], c.points[i]);
}

TEST(Cloud, HeaderCommentsAndErrors) {
  const auto c = io::cloud_from_csv("# x,y,z\n1,2,3\r\n\n  # note\n4.5, -1e-3 ,0\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[1], Point3(4.5, -1e-3, 0.0));
  EXPECT_THROW(io::cloud_from_csv("1,2\n"), ParseError);
  EXPECT_THROW(io::cloud_from_csv("1,2,x\n"), ParseError);
  EXPECT_THROW(io::load_cloud("/nonexistent/cloud.csv"), ParseError);
}

TEST(Raster, RoundTripAtFloatPrecision) {
  const auto dir = scratch("raster");
  Raster<double> r(7, 5, -1.25, 3.5, 0.05);
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = std::sin(static_cast<double>(i)) * 3.0;
  io::save_raster(dir, "elev", r);
  EXPECT_EQ(fs::file_size(dir / "elev.f32"), 7u * 5u * 4u);
  const auto back = io::load_raster<double>(dir, "elev");
  ASSERT_TRUE(back.same_geometry(r));
  for (std::size_t i = 0; i < r.values.size(); ++i) EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(r.values[i])));
  io::write_text(dir / "elev.f32", "abc");
  EXPECT_THROW(io::load_raster<double>(dir, "elev"), ParseError);
}

TEST(Trajectory, RoundTrip) {
  std::mt19937_64 rng(3);
  Trajectory t;
  for (int i = 0; i < 10; ++i) t.points.push_back(io::trajectory_point(0.5 * i, test::random_pose(rng)));
  const auto back = io::trajectory_from_text(io::trajectory_to_text(t));
  ASSERT_EQ(back.points.size(), t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    EXPECT_EQ(back.points[i].t, t.points[i].t);
    EXPECT_EQ(back.points[i].p, t.points[i].p);
    EXPECT_NEAR(back.points[i].q.angularDistance(t.points[i].q), 0.0, 1e-12);
  }
  EXPECT_THROW(io::trajectory_from_text("1 2 3\n"), ParseError);
}

TEST(Json, PoseGraphTerrainVocabularyBow) {
  std::mt19937_64 rng(4);
  const Pose3 p = test::random_pose(rng);
  EXPECT_TRUE(test::pose_near(io::pose_from_json(io::pose_to_json(p)), p, 1e-12));

  PoseGraph g;
  g.add_node(0, Pose3::identity());
  g.add_node(3, p);
  Matrix6 info = Matrix6::Identity() * 2.5;
  info(0, 1) = info(1, 0) = 0.5;
  g.add_edge({0, 3, p, info, EdgeKind::kLoop});
  const auto gj = io::graph_to_json(g);
  // Poses pass through a quaternion, so compare them numerically.
  const PoseGraph g2 = io::graph_from_json(io::Json::parse(gj.dump()));
  ASSERT_EQ(g2.edges().size(), 1u);
  EXPECT_EQ(g2.edges()[0].information, info);
  EXPECT_EQ(g2.edges()[0].kind, EdgeKind::kLoop);
  EXPECT_TRUE(test::pose_near(g2.pose(3), p, 1e-12));
  EXPECT_TRUE(test::pose_near(g2.edges()[0].measurement, p, 1e-12));

  const auto terrain = figure8_terrain(5);
  const auto tj = io::terrain_to_json(terrain);
  const auto t2 = io::terrain_from_json(io::Json::parse(tj.dump()));
  ASSERT_EQ(t2.bumps.size(), terrain.bumps.size());
  EXPECT_EQ(terrain_eval(t2, 1.3, -2.2).z, terrain_eval(terrain, 1.3, -2.2).z);

  Vocabulary v;
  for (int w = 0; w < 3; ++w) {
    Descriptor d{};
    for (int k = 0; k < 128; ++k) d[static_cast<std::size_t>(k)] = static_cast<float>(std::sin(w * 128 + k));
    v.words.push_back(d);
  }
  v.idf = {0.1, 0.0, 2.0};
  v.lambda_w = {0.3, 1.0, 0.7};
  v.seed = 99;
  const auto v2 = io::vocabulary_from_json(io::Json::parse(io::vocabulary_to_json(v).dump()));
  EXPECT_EQ(v2.words, v.words);
  EXPECT_EQ(v2.idf, v.idf);
  EXPECT_EQ(v2.lambda_w, v.lambda_w);
  EXPECT_EQ(v2.seed, 99u);

  const BowVector b{{{1, 0.25}, {7, 1.0 / 3.0}}};
  EXPECT_EQ(io::bow_from_json(io::Json::parse(io::bow_to_json(b).dump())), b);
  EXPECT_THROW(io::bow_from_json(io::Json::parse(R"({"entries":[[3,1.0],[2,1.0]]})")), ParseError);
}

TEST(GpgMapDir, SaveLoadRoundTrip) {
  const auto terrain = figure8_terrain(1);
  auto cfg = figure8_preset(1);
  cfg.waypoints = {{0, 0}, {1, 0}};
  const auto ds = simulate(terrain, cfg);
  GpgMapOptions opt;
  opt.resolution = 0.1;
  GpgMap m = build_gpgmap(0, ds.submaps[0].odom_pose, ds.submaps[0].cloud, opt);
  m.bow = BowVector{{{0, 1.0}}};
  const auto dir = scratch("map");
  io::save_gpgmap(dir, m);
  const GpgMap back = io::load_gpgmap(dir);
  EXPECT_EQ(back.id, m.id);
  EXPECT_TRUE(test::pose_near(back.pose, m.pose, 1e-12));
  EXPECT_EQ(back.descriptors, m.descriptors);
  ASSERT_EQ(back.keypoints.size(), m.keypoints.size());
  for (std::size_t i = 0; i < m.keypoints.size(); ++i) EXPECT_EQ(back.keypoints[i].u, m.keypoints[i].u);
  EXPECT_EQ(back.mask.values, m.mask.values);
  EXPECT_TRUE(back.elevation.same_geometry(m.elevation));
  EXPECT_EQ(back.cloud.points, m.cloud.points);
  ASSERT_TRUE(back.bow.has_value());
  EXPECT_EQ(*back.bow, *m.bow);
  EXPECT_THROW(io::load_gpgmap(dir / "missing"), ParseError);
}
