#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "gpgm/gp_exact.hpp"
#include "gpgm/io.hpp"

namespace gpgm {

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

/// Verbosity from GPGM_LOG: "quiet"/"0", "info"/"1" (default) or "debug"/"2".
inline LogLevel log_level() {
  const char* v = std::getenv("GPGM_LOG");
  if (v == nullptr) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "quiet" || s == "0" || s == "off") return LogLevel::kQuiet;
  if (s == "debug" || s == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

inline void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "[gpgm] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Configuration

struct SynthSettings {
  std::string preset = "figure8";  ///< "figure8" fills missing waypoints; "none" requires them
  std::vector<Vec2> waypoints;
  double submap_spacing = 5.0;
  double half_width = 4.0;
  double density = 40.0;
  double sigma_z = 0.01;
  double odo_sigma_trans = 0.05;
  double odo_sigma_yaw = 0.01;
  double speed = 1.0;
  BumpFieldOptions terrain = [] {
    BumpFieldOptions o;
    o.region = Aabb({-6.0, -16.0}, {16.0, 16.0});
    o.density = 1.2;
    return o;
  }();
};

struct BowSettings {
  int k = 128;
  int max_iters = 50;
  std::string lambda_policy = "median";  ///< "median" per-word spread, or "fixed"
  double lambda_fixed = 1.0;
  int min_descriptors_per_word = 5;  ///< caps k on small corpora
};

struct SlamSettings {
  double odo_sigma_trans = 0.05;  ///< per sqrt(m), planar
  double odo_sigma_yaw = 0.01;    ///< rad per sqrt(m)
  double odo_sigma_z = 0.01;      ///< m per step
  double odo_sigma_rp = 0.002;    ///< rad per step, roll and pitch
  double label_iou = 0.3;         ///< ground-truth footprint IoU that labels a pair as a true revisit
  double false_loop_tol = 0.5;    ///< m; loop edges further than this from ground truth count as false
};

struct BenchSettings {
  std::vector<int> ski_n{1000, 2000, 4000, 8000};
  std::vector<int> exact_n{250, 500, 1000};
  double side = 8.0;          ///< m, square sampling region
  double spacing_ratio = 0.2; ///< SKI grid spacing as a fraction of the length scale
  int repeats = 3;            ///< best-of timing
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  GpgMapOptions gpgmap;
  BowSettings bow;
  CandidateOptions candidates = [] {
    CandidateOptions c;
    c.exclude_recent = 1;
    return c;
  }();
  MatchOptions match;
  LmOptions pose_graph;
  SynthSettings synth;
  SlamSettings slam;
  BenchSettings bench;

  void validate() const {
    gpgmap.validate();
    candidates.validate();
    match.validate();
    pose_graph.validate();
    if (bow.k < 2 || bow.max_iters < 1 || bow.min_descriptors_per_word < 1)
      throw InvalidArgument("config: bow.k >= 2, bow.max_iters >= 1 and bow.min_descriptors_per_word >= 1 are required");
    if (bow.lambda_policy != "median" && bow.lambda_policy != "fixed")
      throw InvalidArgument("config: bow.lambda_policy must be 'median' or 'fixed'");
    if (!(bow.lambda_fixed > 0.0)) throw InvalidArgument("config: bow.lambda_fixed must be positive");
    if (synth.preset != "figure8" && synth.preset != "none") throw InvalidArgument("config: synth.preset must be 'figure8' or 'none'");
    if (synth.preset == "none" && synth.waypoints.size() < 2)
      throw InvalidArgument("config: synth.waypoints needs at least two points when no preset is selected");
    if (!(slam.odo_sigma_trans > 0.0) || !(slam.odo_sigma_yaw > 0.0) || !(slam.odo_sigma_z > 0.0) || !(slam.odo_sigma_rp > 0.0))
      throw InvalidArgument("config: slam odometry sigmas must be positive");
    if (bench.repeats < 1 || !(bench.side > 0.0) || !(bench.spacing_ratio > 0.0))
      throw InvalidArgument("config: bench.repeats, bench.side and bench.spacing_ratio must be positive");
    for (int n : bench.ski_n)
      if (n < 1) throw InvalidArgument("config: bench sizes must be positive");
    for (int n : bench.exact_n)
      if (n < 1) throw InvalidArgument("config: bench sizes must be positive");
  }
};

namespace config_detail {

using io::Json;

inline Json region_to_json(const Aabb& b) { return {b.min.x(), b.min.y(), b.max.x(), b.max.y()}; }

inline Aabb region_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw ParseError("config: region is [xmin, ymin, xmax, ymax]");
  return Aabb(Vec2(v[0], v[1]), Vec2(v[2], v[3]));
}

/// Rejects keys in `user` that the default document does not have, recursively.
inline void check_keys(const Json& defaults, const Json& user, const std::string& path) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!defaults.contains(it.key())) throw ParseError("config: unknown key '" + path + it.key() + "'");
    check_keys(defaults[it.key()], it.value(), path + it.key() + ".");
  }
}

}  // namespace config_detail

inline io::Json config_to_json(const PipelineConfig& c) {
  using io::Json;
  const auto& g = c.gpgmap;
  Json waypoints = Json::array();
  for (const auto& w : c.synth.waypoints) waypoints.push_back({w.x(), w.y()});
  return {
      {"seed", c.seed},
      {"kernel", io::kernel_to_json(g.kernel)},
      {"ski",
       {{"grid_spacing", g.inducing_spacing},
        {"margin", g.margin},
        {"cg",
         {{"rel_tol", g.cg.rel_tol},
          {"max_iters", g.cg.max_iters},
          {"preconditioner", g.cg.preconditioner == Preconditioner::kDiagonal ? "diagonal" : "none"}}}}},
      {"gpgmap", {{"resolution", g.resolution}, {"proxy_radius", g.proxy_radius}, {"mask_threshold", g.mask_threshold}}},
      {"features",
       {{"octaves", g.sift.octaves},
        {"scales", g.sift.scales},
        {"sigma0", g.sift.sigma0},
        {"input_sigma", g.sift.input_sigma},
        {"contrast", g.sift.contrast},
        {"edge_ratio", g.sift.edge_ratio},
        {"border", g.sift.border}}},
      {"bow",
       {{"k", c.bow.k},
        {"max_iters", c.bow.max_iters},
        {"lambda_policy", c.bow.lambda_policy},
        {"lambda_fixed", c.bow.lambda_fixed},
        {"min_descriptors_per_word", c.bow.min_descriptors_per_word}}},
      {"loopclosure",
       {{"top_k", c.candidates.top_k},
        {"iou_threshold", c.candidates.iou_threshold},
        {"inflation", c.candidates.inflation},
        {"exclude_recent", c.candidates.exclude_recent},
        {"matching", c.match.strategy.kind == MatchKind::kRatio ? "ratio" : "bidirectional"},
        {"ratio", c.match.strategy.ratio},
        {"ransac_iterations", c.match.ransac.iterations},
        {"inlier_tol_px", c.match.ransac.inlier_tol_px},
        {"min_inliers", c.match.ransac.min_inliers},
        {"t_db", c.match.validation.t_db},
        {"pass_fraction", c.match.validation.pass_fraction},
        {"icp_max_iters", c.match.icp.max_iters},
        {"icp_max_corr_dist", c.match.icp.max_corr_dist},
        {"icp_tol", c.match.icp.tol},
        {"info_floor", c.match.info_floor},
        // JSON has no infinity; a non-positive value disables the gate.
        {"max_icp_rmse", std::isfinite(c.match.max_icp_rmse) ? c.match.max_icp_rmse : 0.0}}},
      {"pose_graph", {{"max_iters", c.pose_graph.max_iters}, {"lambda0", c.pose_graph.lambda0}, {"tol", c.pose_graph.tol}}},
      {"synth",
       {{"preset", c.synth.preset},
        {"waypoints", waypoints},
        {"submap_spacing", c.synth.submap_spacing},
        {"half_width", c.synth.half_width},
        {"density", c.synth.density},
        {"sigma_z", c.synth.sigma_z},
        {"odo_sigma_trans", c.synth.odo_sigma_trans},
        {"odo_sigma_yaw", c.synth.odo_sigma_yaw},
        {"speed", c.synth.speed},
        {"terrain",
         {{"region", config_detail::region_to_json(c.synth.terrain.region)},
          {"density", c.synth.terrain.density},
          {"min_amplitude", c.synth.terrain.min_amplitude},
          {"max_amplitude", c.synth.terrain.max_amplitude},
          {"min_sigma", c.synth.terrain.min_sigma},
          {"max_sigma", c.synth.terrain.max_sigma}}}}},
      {"slam",
       {{"odo_sigma_trans", c.slam.odo_sigma_trans},
        {"odo_sigma_yaw", c.slam.odo_sigma_yaw},
        {"odo_sigma_z", c.slam.odo_sigma_z},
        {"odo_sigma_rp", c.slam.odo_sigma_rp},
        {"label_iou", c.slam.label_iou},
        {"false_loop_tol", c.slam.false_loop_tol}}},
      {"bench",
       {{"ski_n", c.bench.ski_n},
        {"exact_n", c.bench.exact_n},
        {"side", c.bench.side},
        {"spacing_ratio", c.bench.spacing_ratio},
        {"repeats", c.bench.repeats}}},
  };
}

/// Reads a complete or partial config; missing keys keep their defaults and unknown keys are errors.
inline PipelineConfig config_from_json(const io::Json& user) {
  using io::get;
  using io::Json;
  if (!user.is_object()) throw ParseError("config: top level must be an object");
  const Json defaults = config_to_json(PipelineConfig{});
  config_detail::check_keys(defaults, user, "");
  Json j = defaults;
  j.merge_patch(user);

  PipelineConfig c;
  try {
    c.seed = get<std::uint64_t>(j, "seed");
    auto& g = c.gpgmap;
    g.kernel = io::kernel_from_json(j["kernel"]);
    const Json& ski = j["ski"];
    g.inducing_spacing = get<double>(ski, "grid_spacing");
    g.margin = get<double>(ski, "margin");
    g.cg.rel_tol = get<double>(ski["cg"], "rel_tol");
    g.cg.max_iters = get<int>(ski["cg"], "max_iters");
    const auto pre = get<std::string>(ski["cg"], "preconditioner");
    if (pre != "none" && pre != "diagonal") throw ParseError("config: ski.cg.preconditioner must be 'none' or 'diagonal'");
    g.cg.preconditioner = pre == "diagonal" ? Preconditioner::kDiagonal : Preconditioner::kNone;
    g.resolution = get<double>(j["gpgmap"], "resolution");
    g.proxy_radius = get<double>(j["gpgmap"], "proxy_radius");
    g.mask_threshold = get<double>(j["gpgmap"], "mask_threshold");
    const Json& f = j["features"];
    g.sift.octaves = get<int>(f, "octaves");
    g.sift.scales = get<int>(f, "scales");
    g.sift.sigma0 = get<double>(f, "sigma0");
    g.sift.input_sigma = get<double>(f, "input_sigma");
    g.sift.contrast = get<double>(f, "contrast");
    g.sift.edge_ratio = get<double>(f, "edge_ratio");
    g.sift.border = get<int>(f, "border");

    const Json& b = j["bow"];
    c.bow.k = get<int>(b, "k");
    c.bow.max_iters = get<int>(b, "max_iters");
    c.bow.lambda_policy = get<std::string>(b, "lambda_policy");
    c.bow.lambda_fixed = get<double>(b, "lambda_fixed");
    c.bow.min_descriptors_per_word = get<int>(b, "min_descriptors_per_word");

    const Json& l = j["loopclosure"];
    c.candidates.top_k = get<int>(l, "top_k");
    c.candidates.iou_threshold = get<double>(l, "iou_threshold");
    c.candidates.inflation = get<double>(l, "inflation");
    c.candidates.exclude_recent = get<int>(l, "exclude_recent");
    const auto kind = get<std::string>(l, "matching");
    if (kind != "ratio" && kind != "bidirectional") throw ParseError("config: loopclosure.matching must be 'ratio' or 'bidirectional'");
    c.match.strategy.kind = kind == "ratio" ? MatchKind::kRatio : MatchKind::kBidirectional;
    c.match.strategy.ratio = get<double>(l, "ratio");
    c.match.ransac.iterations = get<int>(l, "ransac_iterations");
    c.match.ransac.inlier_tol_px = get<double>(l, "inlier_tol_px");
    c.match.ransac.min_inliers = get<int>(l, "min_inliers");
    c.match.validation.t_db = get<double>(l, "t_db");
    c.match.validation.pass_fraction = get<double>(l, "pass_fraction");
    c.match.icp.max_iters = get<int>(l, "icp_max_iters");
    c.match.icp.max_corr_dist = get<double>(l, "icp_max_corr_dist");
    c.match.icp.tol = get<double>(l, "icp_tol");
    c.match.info_floor = get<double>(l, "info_floor");
    const double gate = get<double>(l, "max_icp_rmse");
    c.match.max_icp_rmse = gate > 0.0 ? gate : std::numeric_limits<double>::infinity();

    c.pose_graph.max_iters = get<int>(j["pose_graph"], "max_iters");
    c.pose_graph.lambda0 = get<double>(j["pose_graph"], "lambda0");
    c.pose_graph.tol = get<double>(j["pose_graph"], "tol");

    const Json& s = j["synth"];
    c.synth.preset = get<std::string>(s, "preset");
    for (const auto& w : get<Json>(s, "waypoints")) {
      const auto v = w.get<std::vector<double>>();
      if (v.size() != 2) throw ParseError("config: synth.waypoints entries are [x, y]");
      c.synth.waypoints.emplace_back(v[0], v[1]);
    }
    c.synth.submap_spacing = get<double>(s, "submap_spacing");
    c.synth.half_width = get<double>(s, "half_width");
    c.synth.density = get<double>(s, "density");
    c.synth.sigma_z = get<double>(s, "sigma_z");
    c.synth.odo_sigma_trans = get<double>(s, "odo_sigma_trans");
    c.synth.odo_sigma_yaw = get<double>(s, "odo_sigma_yaw");
    c.synth.speed = get<double>(s, "speed");
    const Json& t = s["terrain"];
    c.synth.terrain.region = config_detail::region_from_json(get<Json>(t, "region"));
    c.synth.terrain.density = get<double>(t, "density");
    c.synth.terrain.min_amplitude = get<double>(t, "min_amplitude");
    c.synth.terrain.max_amplitude = get<double>(t, "max_amplitude");
    c.synth.terrain.min_sigma = get<double>(t, "min_sigma");
    c.synth.terrain.max_sigma = get<double>(t, "max_sigma");

    const Json& sl = j["slam"];
    c.slam.odo_sigma_trans = get<double>(sl, "odo_sigma_trans");
    c.slam.odo_sigma_yaw = get<double>(sl, "odo_sigma_yaw");
    c.slam.odo_sigma_z = get<double>(sl, "odo_sigma_z");
    c.slam.odo_sigma_rp = get<double>(sl, "odo_sigma_rp");
    c.slam.label_iou = get<double>(sl, "label_iou");
    c.slam.false_loop_tol = get<double>(sl, "false_loop_tol");

    const Json& be = j["bench"];
    c.bench.ski_n = get<std::vector<int>>(be, "ski_n");
    c.bench.exact_n = get<std::vector<int>>(be, "exact_n");
    c.bench.side = get<double>(be, "side");
    c.bench.spacing_ratio = get<double>(be, "spacing_ratio");
    c.bench.repeats = get<int>(be, "repeats");
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Stage helpers

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index writes its own slot,
/// so results do not depend on the worker count. The first exception is rethrown.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline SimDataset make_dataset(const PipelineConfig& cfg) {
  cfg.validate();
  SimConfig sc;
  sc.waypoints = cfg.synth.waypoints.empty() && cfg.synth.preset == "figure8" ? figure8_waypoints() : cfg.synth.waypoints;
  sc.submap_spacing = cfg.synth.submap_spacing;
  sc.half_width = cfg.synth.half_width;
  sc.density = cfg.synth.density;
  sc.sigma_z = cfg.synth.sigma_z;
  sc.odo_sigma_trans = cfg.synth.odo_sigma_trans;
  sc.odo_sigma_yaw = cfg.synth.odo_sigma_yaw;
  sc.speed = cfg.synth.speed;
  sc.seed = cfg.seed;
  return simulate(random_bump_field(cfg.synth.terrain, cfg.seed), sc);
}

inline std::vector<GpgMap> build_maps(const std::vector<SimSubmap>& submaps, const GpgMapOptions& opt, int threads) {
  std::vector<GpgMap> maps(submaps.size());
  parallel_for(static_cast<int>(submaps.size()), threads, [&](int i) {
    const auto& s = submaps[static_cast<std::size_t>(i)];
    maps[static_cast<std::size_t>(i)] = build_gpgmap(s.id, s.odom_pose, s.cloud, opt);
  });
  return maps;
}

/// Trains on the maps' own descriptors. k is capped so every word has a few descriptors.
/// Returns nothing when the corpus is too small for two words.
inline std::optional<Vocabulary> train_vocabulary(const std::vector<GpgMap>& maps, const PipelineConfig& cfg) {
  std::vector<std::vector<Descriptor>> images;
  std::size_t total = 0;
  for (const auto& m : maps) {
    images.push_back(m.descriptors);
    total += m.descriptors.size();
  }
  const int k = std::min(cfg.bow.k, static_cast<int>(total / static_cast<std::size_t>(cfg.bow.min_descriptors_per_word)));
  if (k < 2) return std::nullopt;
  Vocabulary v = build_vocabulary(images, {k, cfg.bow.max_iters, cfg.seed});
  if (cfg.bow.lambda_policy == "fixed") std::fill(v.lambda_w.begin(), v.lambda_w.end(), cfg.bow.lambda_fixed);
  return v;
}

inline void attach_bow(std::vector<GpgMap>& maps, const std::optional<Vocabulary>& vocab) {
  for (auto& m : maps) m.bow = vocab ? bow_vector(*vocab, m.descriptors) : BowVector{};
}

/// Odometry edge information from the configured noise model and the step length.
inline Matrix6 odometry_information(const SlamSettings& s, const Pose3& rel) {
  const double step = std::max(rel.translation().head<2>().norm(), 1e-3);
  Matrix6 info = Matrix6::Zero();
  const double vt = s.odo_sigma_trans * s.odo_sigma_trans * step;
  const double vy = s.odo_sigma_yaw * s.odo_sigma_yaw * step;
  info.diagonal() << 1.0 / vt, 1.0 / vt, 1.0 / (s.odo_sigma_z * s.odo_sigma_z), 1.0 / (s.odo_sigma_rp * s.odo_sigma_rp),
      1.0 / (s.odo_sigma_rp * s.odo_sigma_rp), 1.0 / vy;
  return info;
}

// ---------------------------------------------------------------------------
// Incremental SLAM

struct LoopRecord {
  int i = 0;  ///< map whose frame is the source of the match
  int j = 0;
  MatchResult match;
  double gt_translation_error = -1.0;  ///< < 0 when no ground truth
  double gt_iou = -1.0;
  bool is_false = false;
};

struct BowScoreRow {
  int new_id = 0;
  int old_id = 0;
  double score = 0.0;
  double gt_iou = 0.0;
  bool label = false;
};

struct SlamResult {
  PoseGraph graph;
  std::vector<GpgMap> maps;
  std::optional<Vocabulary> vocabulary;
  std::vector<io::Json> decisions;
  std::vector<LoopRecord> loops;
  std::vector<BowScoreRow> bow_scores;
  LmReport final_report;
  int matches_attempted = 0;
};

inline Aabb gt_box(const GpgMap& m, const SimSubmap& s) { return transformed_box(m.bounds, s.gt_pose); }

/// Processes submaps in id order: odometry node and edge, candidate selection,
/// validated matching, loop edges and re-optimization after each accepted loop.
inline SlamResult run_slam(const std::vector<SimSubmap>& submaps, const PipelineConfig& cfg, int threads, bool have_gt) {
  cfg.validate();
  SlamResult res;
  log(LogLevel::kInfo, "building " + std::to_string(submaps.size()) + " maps");
  res.maps = build_maps(submaps, cfg.gpgmap, threads);
  res.vocabulary = train_vocabulary(res.maps, cfg);
  attach_bow(res.maps, res.vocabulary);

  MatchOptions mopt = cfg.match;
  mopt.ransac.seed = cfg.seed;

  BowDatabase db;
  std::vector<MapFootprint> footprints;
  std::set<std::pair<int, int>> matched;
  PoseGraph& g = res.graph;

  for (std::size_t k = 0; k < submaps.size(); ++k) {
    const auto& sm = submaps[k];
    const GpgMap& map = res.maps[k];
    if (k == 0) {
      g.add_node(sm.id, sm.odom_pose);
    } else {
      const auto& prev = submaps[k - 1];
      const Pose3 rel = prev.odom_pose.inverse() * sm.odom_pose;
      g.add_node(sm.id, g.pose(prev.id) * rel);
      g.add_edge({prev.id, sm.id, rel, odometry_information(cfg.slam, rel), EdgeKind::kOdometry});
    }
    db.add(sm.id, *map.bow);

    if (have_gt) {
      for (std::size_t j = 0; j < k; ++j) {
        if (std::abs(submaps[j].id - sm.id) <= cfg.candidates.exclude_recent) continue;
        const double iou = aabb_iou(gt_box(map, sm), gt_box(res.maps[j], submaps[j]));
        res.bow_scores.push_back({sm.id, submaps[j].id, similarity(*map.bow, *res.maps[j].bow), iou, iou > cfg.slam.label_iou});
      }
    }

    // Footprints use the current estimate inflated by its marginal uncertainty.
    const auto covs = marginal_covariances(g);
    footprints.clear();
    MapFootprint self;
    for (std::size_t j = 0; j <= k; ++j) {
      const Pose3& pose = g.pose(submaps[j].id);
      const Eigen::Matrix2d pc = planar_position_covariance(pose, covs[g.index_of(submaps[j].id)]);
      MapFootprint fp{submaps[j].id, res.maps[j].bounds, pose, pc(0, 0), pc(1, 1)};
      if (j == k) self = fp;
      else footprints.push_back(fp);
    }
    const CandidateSelection sel = select_candidates(db, footprints, matched, self, *map.bow, cfg.candidates);

    for (const auto& s : sel.skipped) {
      res.decisions.push_back({{"new", sm.id},
                               {"candidate", s.id_b},
                               {"source", nullptr},
                               {"bow_score", s.bow_score},
                               {"bow_rank", s.bow_rank},
                               {"iou", s.iou},
                               {"accepted", false},
                               {"reason", s.reason}});
    }

    bool added_loop = false;
    for (const auto& c : sel.queue) {
      if (matched.count(unordered_key(c.id_a, c.id_b))) continue;
      const std::size_t jb = g.index_of(c.id_b);
      const GpgMap& old = res.maps[jb];
      ++res.matches_attempted;
      // The stored map is the first argument: the edge then runs from the older node.
      const MatchResult mr = match_gpgmaps(old, map, mopt);
      io::Json d{{"new", sm.id},
                 {"candidate", c.id_b},
                 {"source", to_string(c.source)},
                 {"priority", c.priority},
                 {"accepted", mr.accepted},
                 {"reason", mr.accepted ? "accepted" : mr.reason},
                 {"feature_matches", mr.feature_matches},
                 {"inliers", mr.se2.inliers.size()},
                 {"pass_fraction", mr.pass_fraction},
                 {"icp_rmse", mr.icp_rmse}};
      if (mr.accepted) {
        matched.insert(unordered_key(c.id_a, c.id_b));
        LoopRecord rec{c.id_b, sm.id, mr};
        const Pose3 measurement = mr.relative_pose.inverse();
        if (have_gt) {
          const Pose3 truth = submaps[jb].gt_pose.inverse() * sm.gt_pose;
          rec.gt_translation_error = (truth.inverse() * measurement).translation().norm();
          rec.gt_iou = aabb_iou(gt_box(old, submaps[jb]), gt_box(map, sm));
          rec.is_false = rec.gt_iou <= 0.0 || rec.gt_translation_error > cfg.slam.false_loop_tol;
          d["gt_translation_error"] = rec.gt_translation_error;
        }
        g.add_edge({c.id_b, sm.id, measurement, mr.information, EdgeKind::kLoop});
        res.loops.push_back(rec);
        added_loop = true;
        log(LogLevel::kInfo, "loop " + std::to_string(c.id_b) + " -> " + std::to_string(sm.id) + " accepted");
      }
      res.decisions.push_back(std::move(d));
    }
    if (added_loop) optimize(g, cfg.pose_graph);
  }
  res.final_report = optimize(g, cfg.pose_graph);
  return res;
}

inline Trajectory graph_trajectory(const PoseGraph& g, const std::vector<SimSubmap>& submaps) {
  Trajectory t;
  for (const auto& s : submaps) t.points.push_back(io::trajectory_point(s.timestamp, g.pose(s.id)));
  return t;
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchRow {
  std::string method;
  int n = 0;
  double fit_seconds = 0.0;
  int cg_iters = 0;
};

/// Least-squares slope of log(seconds) against log(n).
inline double loglog_slope(const std::vector<BenchRow>& rows, const std::string& method) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    const double x = std::log(static_cast<double>(r.n)), y = std::log(r.fit_seconds);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++m;
  }
  if (m < 2) throw InvalidArgument("loglog_slope: need at least two sizes");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline void bench_points(const PipelineConfig& cfg, int n, std::vector<Vec2>& xs, std::vector<double>& zs) {
  BumpFieldOptions bo;
  bo.region = Aabb({0.0, 0.0}, {cfg.bench.side, cfg.bench.side});
  const TerrainSpec t = random_bump_field(bo, cfg.seed);
  std::mt19937_64 rng(splitmix64(cfg.seed + static_cast<std::uint64_t>(n)));
  std::uniform_real_distribution<double> u(0.0, cfg.bench.side);
  std::normal_distribution<double> noise(0.0, cfg.gpgmap.kernel.sigma_z);
  xs.clear();
  zs.clear();
  for (int i = 0; i < n; ++i) {
    const Vec2 x(u(rng), u(rng));
    xs.push_back(x);
    zs.push_back(terrain_eval(t, x.x(), x.y()).z + noise(rng));
  }
}

/// Fit times for SKI (fixed region and grid) and the exact GP; best of `repeats`.
inline std::vector<BenchRow> run_bench(const PipelineConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  const auto& k = cfg.gpgmap.kernel;
  const double spacing = cfg.bench.spacing_ratio * k.length_scale;
  const InducingGrid grid = build_grid(Aabb({0.0, 0.0}, {cfg.bench.side, cfg.bench.side}), spacing, 2.0 * spacing + 2.0 * k.length_scale);
  std::vector<Vec2> xs;
  std::vector<double> zs;
  for (int n : cfg.bench.ski_n) {
    bench_points(cfg, n, xs, zs);
    BenchRow r{"ski", n, std::numeric_limits<double>::infinity(), 0};
    for (int rep = 0; rep < cfg.bench.repeats; ++rep) {
      const auto t0 = clock::now();
      const SkiModel m = fit_ski(xs, zs, k, grid, cfg.gpgmap.cg);
      r.fit_seconds = std::min(r.fit_seconds, std::chrono::duration<double>(clock::now() - t0).count());
      r.cg_iters = m.cg_stats().iterations;
    }
    rows.push_back(r);
  }
  for (int n : cfg.bench.exact_n) {
    bench_points(cfg, n, xs, zs);
    BenchRow r{"exact", n, std::numeric_limits<double>::infinity(), 0};
    for (int rep = 0; rep < cfg.bench.repeats; ++rep) {
      const auto t0 = clock::now();
      const ExactGp gp = fit_exact(xs, zs, k);
      r.fit_seconds = std::min(r.fit_seconds, std::chrono::duration<double>(clock::now() - t0).count());
      if (gp.size() != xs.size()) throw Error("bench: exact fit lost points");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace gpgm
