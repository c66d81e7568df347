// Command-line runner: synth, build, match, slam, eval, bench.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpgm/pipeline.hpp"

namespace fs = std::filesystem;
using gpgm::io::Json;

namespace {

/// A pipeline stage failed; reported with exit code 1.
struct StageFailure : std::runtime_error {
  StageFailure(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

/// Config problems; reported with exit code 2.
struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const gpgm::Error& e) {
    throw StageFailure(name, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageFailure(name, e.what());
  }
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config; missing keys keep their defaults");
  app->add_option("--seed", c.seed, "Seed overriding the config seed");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

gpgm::PipelineConfig load_config(const Common& c, const CLI::App* app) {
  Json j = Json::object();
  if (!c.config.empty()) {
    try {
      j = gpgm::io::read_json(c.config);
    } catch (const gpgm::Error& e) {
      throw ConfigFailure(e.what());
    }
  }
  if (app->count("--seed") > 0) j["seed"] = c.seed;
  try {
    return gpgm::config_from_json(j);
  } catch (const gpgm::Error& e) {
    throw ConfigFailure(e.what());
  }
}

void write_config(const fs::path& out, const gpgm::PipelineConfig& cfg) {
  gpgm::io::write_json(out / "config.json", gpgm::config_to_json(cfg));
}

// --- synth -----------------------------------------------------------------

void cmd_synth(const gpgm::PipelineConfig& cfg, const fs::path& out) {
  const auto ds = stage("synth", [&] { return gpgm::make_dataset(cfg); });
  stage("write", [&] {
    gpgm::io::save_dataset(out, ds);
    write_config(out, cfg);
  });
  gpgm::log(gpgm::LogLevel::kInfo, "synth: " + std::to_string(ds.submaps.size()) + " submaps written to " + out.string());
}

// --- build -----------------------------------------------------------------

void cmd_build(const gpgm::PipelineConfig& cfg, const fs::path& input, const std::string& vocab_path, const fs::path& out,
               int threads) {
  std::vector<gpgm::SimSubmap> submaps;
  stage("load", [&] {
    if (fs::is_directory(input)) {
      submaps = gpgm::io::load_submaps(input);
    } else {
      gpgm::SimSubmap s;
      s.cloud = gpgm::io::load_cloud(input);
      fs::path pose_file = input;
      pose_file.replace_extension(".pose.json");
      if (fs::exists(pose_file)) {
        const Json j = gpgm::io::read_json(pose_file);
        s.id = gpgm::io::get<int>(j, "id");
        s.odom_pose = gpgm::io::pose_from_json(j.contains("odometry") ? j["odometry"] : j["pose"]);
      }
      submaps.push_back(std::move(s));
    }
  });
  auto maps = stage("gpgmap", [&] { return gpgm::build_maps(submaps, cfg.gpgmap, threads); });
  std::optional<gpgm::Vocabulary> vocab;
  stage("bow", [&] {
    if (!vocab_path.empty()) vocab = gpgm::io::vocabulary_from_json(gpgm::io::read_json(vocab_path));
    else if (maps.size() > 1) vocab = gpgm::train_vocabulary(maps, cfg);
    if (vocab) gpgm::attach_bow(maps, vocab);
  });
  stage("write", [&] {
    fs::create_directories(out);
    if (maps.size() == 1 && !fs::is_directory(input)) {
      gpgm::io::save_gpgmap(out, maps.front());
    } else {
      for (const auto& m : maps) gpgm::io::save_gpgmap(out / ("map_" + std::to_string(m.id)), m);
    }
    if (vocab && vocab_path.empty()) gpgm::io::write_json(out / "vocabulary.json", gpgm::io::vocabulary_to_json(*vocab));
    write_config(out, cfg);
  });
  gpgm::log(gpgm::LogLevel::kInfo, "build: " + std::to_string(maps.size()) + " maps written to " + out.string());
}

// --- match -----------------------------------------------------------------

int cmd_match(const gpgm::PipelineConfig& cfg, const fs::path& a, const fs::path& b, const fs::path& out) {
  const auto m1 = stage("load", [&] { return gpgm::io::load_gpgmap(a); });
  const auto m2 = stage("load", [&] { return gpgm::io::load_gpgmap(b); });
  auto opt = cfg.match;
  opt.ransac.seed = cfg.seed;
  const auto r = stage("match", [&] { return gpgm::match_gpgmaps(m1, m2, opt); });
  stage("write", [&] { gpgm::io::write_json(out / "match.json", gpgm::io::match_to_json(r)); });
  gpgm::log(gpgm::LogLevel::kInfo, std::string("match: ") + (r.accepted ? "accepted" : "rejected (" + r.reason + ")"));
  return 0;
}

// --- slam ------------------------------------------------------------------

void cmd_slam(const gpgm::PipelineConfig& cfg, const fs::path& dataset, const fs::path& out, int threads, bool save_maps) {
  const auto submaps = stage("load", [&] { return gpgm::io::load_submaps(dataset); });
  bool have_gt = false;
  stage("load", [&] {
    for (int id = 0; id < static_cast<int>(submaps.size()); ++id)
      if (gpgm::io::read_json(dataset / (gpgm::io::submap_name(id) + ".pose.json")).contains("pose")) have_gt = true;
  });
  const auto res = stage("slam", [&] { return gpgm::run_slam(submaps, cfg, threads, have_gt); });

  stage("write", [&] {
    namespace io = gpgm::io;
    io::write_json(out / "graph.json", io::graph_to_json(res.graph));
    io::save_trajectory(out / "trajectory_est.txt", gpgm::graph_trajectory(res.graph, submaps));
    gpgm::Trajectory odo;
    for (const auto& s : submaps) odo.points.push_back(io::trajectory_point(s.timestamp, s.odom_pose));
    io::save_trajectory(out / "trajectory_odom.txt", odo);

    std::string log;
    for (const auto& d : res.decisions) log += d.dump() + "\n";
    io::write_text(out / "decisions.jsonl", log);

    std::string scores = "new,old,score,gt_iou,label\n";
    for (const auto& r : res.bow_scores)
      scores += std::to_string(r.new_id) + "," + std::to_string(r.old_id) + "," + io::fmt(r.score) + "," + io::fmt(r.gt_iou) + "," +
                (r.label ? "1" : "0") + "\n";
    if (have_gt) io::write_text(out / "bow_scores.csv", scores);

    Json loops = Json::array();
    int false_loops = 0;
    for (const auto& l : res.loops) {
      Json e{{"i", l.i}, {"j", l.j}, {"inliers", l.match.se2.inliers.size()}, {"pass_fraction", l.match.pass_fraction},
             {"icp_rmse", l.match.icp_rmse}};
      if (have_gt) {
        e["gt_translation_error"] = l.gt_translation_error;
        e["gt_iou"] = l.gt_iou;
        e["false"] = l.is_false;
      }
      false_loops += l.is_false ? 1 : 0;
      loops.push_back(e);
    }
    Json summary{{"maps", submaps.size()},
                 {"matches_attempted", res.matches_attempted},
                 {"loops", res.loops.size()},
                 {"loop_edges", loops},
                 {"initial_cost", res.final_report.initial_cost},
                 {"final_cost", res.final_report.final_cost}};
    if (have_gt) summary["false_loops"] = false_loops;
    io::write_json(out / "summary.json", summary);
    if (res.vocabulary) io::write_json(out / "vocabulary.json", io::vocabulary_to_json(*res.vocabulary));
    if (save_maps)
      for (const auto& m : res.maps) io::save_gpgmap(out / "maps" / ("map_" + std::to_string(m.id)), m);
    write_config(out, cfg);
  });
  gpgm::log(gpgm::LogLevel::kInfo, "slam: " + std::to_string(res.loops.size()) + " loop closures, output in " + out.string());
}

// --- eval ------------------------------------------------------------------

void cmd_eval(const fs::path& est_path, const fs::path& gt_path, const std::string& scores_path, const fs::path& out) {
  namespace io = gpgm::io;
  const auto est = stage("load", [&] { return io::load_trajectory(est_path); });
  const auto gt = stage("load", [&] { return io::load_trajectory(gt_path); });
  const auto m = stage("eval", [&] { return gpgm::evaluate_trajectory(est, gt); });
  std::optional<gpgm::Curves> curves;
  if (!scores_path.empty()) {
    std::vector<double> scores;
    std::vector<bool> labels;
    stage("load", [&] {
      const auto lines = io::data_lines(io::read_text(scores_path));
      for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = io::split(lines[i], ',');
        if (f.size() != 5) throw gpgm::ParseError(scores_path + ": expected new,old,score,gt_iou,label");
        scores.push_back(io::parse_double(f[2], scores_path));
        labels.push_back(io::parse_double(f[4], scores_path) != 0.0);
      }
    });
    curves = stage("eval", [&] { return gpgm::pr_roc(scores, labels); });
  }
  stage("write", [&] {
    Json j{{"rmse", m.rmse},
           {"final_error", m.final_error},
           {"rmse_pct", m.rmse_pct},
           {"max_err_pct", m.max_err_pct},
           {"n_correspondences", m.n_correspondences}};
    if (curves) {
      j["roc_auc"] = curves->roc_auc;
      j["pr_auc"] = curves->pr_auc;
      std::string pr = "threshold,precision,recall\n", roc = "threshold,fpr,tpr\n";
      for (const auto& p : curves->pr) pr += io::fmt(p.threshold) + "," + io::fmt(p.precision) + "," + io::fmt(p.recall) + "\n";
      for (const auto& p : curves->roc) roc += io::fmt(p.threshold) + "," + io::fmt(p.fpr) + "," + io::fmt(p.tpr) + "\n";
      io::write_text(out / "pr.csv", pr);
      io::write_text(out / "roc.csv", roc);
    }
    io::write_json(out / "metrics.json", j);
  });
  gpgm::log(gpgm::LogLevel::kInfo, "eval: rmse " + io::fmt(m.rmse) + " m");
}

// --- bench -----------------------------------------------------------------

void cmd_bench(const gpgm::PipelineConfig& cfg, const fs::path& out) {
  const auto rows = stage("bench", [&] { return gpgm::run_bench(cfg); });
  stage("write", [&] {
    std::string csv = "method,n,fit_seconds,cg_iters\n";
    for (const auto& r : rows)
      csv += r.method + "," + std::to_string(r.n) + "," + gpgm::io::fmt(r.fit_seconds) + "," + std::to_string(r.cg_iters) + "\n";
    gpgm::io::write_text(out / "bench.csv", csv);
    Json j = Json::object();
    if (cfg.bench.ski_n.size() > 1) j["ski_slope"] = gpgm::loglog_slope(rows, "ski");
    if (cfg.bench.exact_n.size() > 1) j["exact_slope"] = gpgm::loglog_slope(rows, "exact");
    gpgm::io::write_json(out / "bench_summary.json", j);
  });
  for (const auto& r : rows)
    gpgm::log(gpgm::LogLevel::kInfo, "bench: " + r.method + " n=" + std::to_string(r.n) + " " + gpgm::io::fmt(r.fit_seconds) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process gradient maps: synthesis, map building, matching, SLAM and evaluation"};
  app.require_subcommand(1);

  Common common;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, common);

  auto* build = app.add_subcommand("build", "Build GPGMaps from a cloud file or a dataset directory");
  add_common(build, common);
  std::string build_input, build_vocab;
  build->add_option("--input", build_input, "Cloud CSV or dataset directory")->required();
  build->add_option("--vocab", build_vocab, "Existing vocabulary JSON");

  auto* match = app.add_subcommand("match", "Match two GPGMap directories");
  add_common(match, common);
  std::string map1, map2;
  match->add_option("--map1", map1, "First map directory")->required();
  match->add_option("--map2", map2, "Second map directory")->required();

  auto* slam = app.add_subcommand("slam", "Run the loop-closing pipeline on a dataset directory");
  add_common(slam, common);
  std::string dataset;
  bool save_maps = false;
  slam->add_option("--dataset", dataset, "Dataset directory")->required();
  slam->add_flag("--save-maps", save_maps, "Also write every GPGMap directory");

  auto* eval = app.add_subcommand("eval", "Trajectory metrics and PR/ROC curves");
  add_common(eval, common);
  std::string est, gt, scores;
  eval->add_option("--est", est, "Estimated trajectory")->required();
  eval->add_option("--gt", gt, "Ground-truth trajectory")->required();
  eval->add_option("--scores", scores, "bow_scores.csv from slam");

  auto* bench = app.add_subcommand("bench", "Fit-time scaling of SKI and the exact GP");
  add_common(bench, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const auto cfg = load_config(common, sub);
    const fs::path out = common.out;
    if (sub == synth) cmd_synth(cfg, out);
    else if (sub == build) cmd_build(cfg, build_input, build_vocab, out, common.threads);
    else if (sub == match) cmd_match(cfg, map1, map2, out);
    else if (sub == slam) cmd_slam(cfg, dataset, out, common.threads, save_maps);
    else if (sub == eval) cmd_eval(est, gt, scores, out);
    else if (sub == bench) cmd_bench(cfg, out);
    return 0;
  } catch (const ConfigFailure& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const StageFailure& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
