#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gpgm/bow.hpp"
#include "gpgm/eval.hpp"
#include "gpgm/gpgmap.hpp"
#include "gpgm/loopclosure.hpp"
#include "gpgm/pose_graph.hpp"
#include "gpgm/synth.hpp"

namespace gpgm::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "raster files are written in native little-endian order");

// ---------------------------------------------------------------------------
// Text helpers

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, std::string_view text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + p.string());
}

/// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError(where + ": bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Lines without trailing CR, skipping blanks and '#' comments.
inline std::vector<std::string_view> data_lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    out.push_back(line);
  }
  return out;
}

inline Json read_json(const fs::path& p) {
  try {
    return Json::parse(read_text(p));
  } catch (const Json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

/// Typed field access that reports the missing key.
template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Base64 (RFC 4648, with padding)

inline std::string base64_encode(const std::uint8_t* data, std::size_t n) {
  static constexpr char kAlpha[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    const std::uint32_t b0 = data[i], b1 = i + 1 < n ? data[i + 1] : 0u, b2 = i + 2 < n ? data[i + 2] : 0u;
    const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
    out += kAlpha[(v >> 18) & 63];
    out += kAlpha[(v >> 12) & 63];
    out += i + 1 < n ? kAlpha[(v >> 6) & 63] : '=';
    out += i + 2 < n ? kAlpha[v & 63] : '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (s.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int q[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = s[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == s.size() && k >= 2) {
        q[k] = 0;
        ++pad;
      } else {
        q[k] = val(c);
        if (q[k] < 0 || pad > 0) throw ParseError("base64: invalid character");
      }
    }
    const std::uint32_t v = (static_cast<std::uint32_t>(q[0]) << 18) | (static_cast<std::uint32_t>(q[1]) << 12) |
                            (static_cast<std::uint32_t>(q[2]) << 6) | static_cast<std::uint32_t>(q[3]);
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poses

inline Json pose_to_json(const Pose3& p) {
  const Eigen::Matrix4d m = p.matrix();
  Json rows = Json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

inline Pose3 pose_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("pose: expected 4x4 nested rows");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 4) throw ParseError("pose: expected 4x4 nested rows");
    for (int c = 0; c < 4; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return Pose3::from_matrix(m);
}

template <int N>
Json matrix_to_json(const Eigen::Matrix<double, N, N>& m) {
  Json rows = Json::array();
  for (int r = 0; r < N; ++r) {
    Json row = Json::array();
    for (int c = 0; c < N; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

template <int N>
Eigen::Matrix<double, N, N> matrix_from_json(const Json& j) {
  if (!j.is_array() || j.size() != N) throw ParseError("matrix: wrong row count");
  Eigen::Matrix<double, N, N> m;
  for (int r = 0; r < N; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != N) throw ParseError("matrix: wrong column count");
    for (int c = 0; c < N; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Point clouds: "x,y,z" per line with an optional '#' header

inline std::string cloud_to_csv(const PointCloud& c) {
  std::string s = "# x,y,z\n";
  for (const auto& p : c.points) s += fmt(p.x()) + "," + fmt(p.y()) + "," + fmt(p.z()) + "\n";
  return s;
}

inline PointCloud cloud_from_csv(std::string_view text, const std::string& name = "cloud") {
  PointCloud c;
  c.frame_id = name;
  for (const auto line : data_lines(text)) {
    const auto f = split(line, ',');
    if (f.size() != 3) throw ParseError(name + ": expected 3 fields per row");
    c.points.emplace_back(parse_double(f[0], name), parse_double(f[1], name), parse_double(f[2], name));
  }
  return c;
}

inline void save_cloud(const fs::path& p, const PointCloud& c) { write_text(p, cloud_to_csv(c)); }
inline PointCloud load_cloud(const fs::path& p) { return cloud_from_csv(read_text(p), p.stem().string()); }

// ---------------------------------------------------------------------------
// Rasters: <name>.f32 (float32 row-major) plus <name>.json header

template <typename T>
void save_raster(const fs::path& dir, const std::string& name, const Raster<T>& r) {
  std::string bytes(r.values.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const float f = static_cast<float>(r.values[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  write_text(dir / (name + ".f32"), bytes);
  write_json(dir / (name + ".json"), Json{{"width", r.width},
                                          {"height", r.height},
                                          {"origin_x", r.origin_x},
                                          {"origin_y", r.origin_y},
                                          {"resolution", r.resolution}});
}

template <typename T = double>
Raster<T> load_raster(const fs::path& dir, const std::string& name) {
  const Json h = read_json(dir / (name + ".json"));
  Raster<T> r(get<int>(h, "width"), get<int>(h, "height"), get<double>(h, "origin_x"), get<double>(h, "origin_y"),
              get<double>(h, "resolution"));
  const std::string bytes = read_text(dir / (name + ".f32"));
  if (bytes.size() != r.values.size() * sizeof(float)) throw ParseError(name + ".f32: size does not match its header");
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    float f = 0.0f;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    r.values[i] = static_cast<T>(f);
  }
  return r;
}

/// 8-bit PGM preview scaled to the raster's own range; row 0 is the top of the image.
template <typename T>
void save_pgm(const fs::path& p, const Raster<T>& r) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto v : r.values) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::string s = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  for (int v = r.height - 1; v >= 0; --v)
    for (int u = 0; u < r.width; ++u)
      s += static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * (static_cast<double>(r.at(u, v)) - lo) / span)));
  write_text(p, s);
}

// ---------------------------------------------------------------------------
// Trajectories: "timestamp x y z qx qy qz qw"

inline std::string trajectory_to_text(const Trajectory& t) {
  std::string s = "# timestamp x y z qx qy qz qw\n";
  for (const auto& p : t.points) {
    s += fmt(p.t) + " " + fmt(p.p.x()) + " " + fmt(p.p.y()) + " " + fmt(p.p.z()) + " " + fmt(p.q.x()) + " " +
         fmt(p.q.y()) + " " + fmt(p.q.z()) + " " + fmt(p.q.w()) + "\n";
  }
  return s;
}

inline Trajectory trajectory_from_text(std::string_view text, const std::string& name = "trajectory") {
  Trajectory t;
  for (const auto line : data_lines(text)) {
    std::vector<double> v;
    for (const auto f : split(line, ' '))
      if (!f.empty()) v.push_back(parse_double(f, name));
    if (v.size() != 8) throw ParseError(name + ": expected 8 fields per line");
    t.points.push_back({v[0], Eigen::Vector3d(v[1], v[2], v[3]), Eigen::Quaterniond(v[7], v[4], v[5], v[6]).normalized()});
  }
  t.validate();
  return t;
}

inline void save_trajectory(const fs::path& p, const Trajectory& t) { write_text(p, trajectory_to_text(t)); }
inline Trajectory load_trajectory(const fs::path& p) { return trajectory_from_text(read_text(p), p.string()); }

inline TrajectoryPoint trajectory_point(double t, const Pose3& pose) { return {t, pose.translation(), pose.rotation()}; }

// ---------------------------------------------------------------------------
// Kernel, terrain

inline Json kernel_to_json(const SeKernelParams& k) {
  return {{"sigma_f", k.sigma_f}, {"length_scale", k.length_scale}, {"sigma_z", k.sigma_z}};
}

inline SeKernelParams kernel_from_json(const Json& j) {
  SeKernelParams k{get<double>(j, "sigma_f"), get<double>(j, "length_scale"), get<double>(j, "sigma_z")};
  k.validate();
  return k;
}

inline Json terrain_to_json(const TerrainSpec& t) {
  Json bumps = Json::array();
  for (const auto& b : t.bumps)
    bumps.push_back({{"cx", b.center.x()}, {"cy", b.center.y()}, {"amplitude", b.amplitude}, {"sigma", b.sigma}});
  return {{"a", t.a}, {"b", t.b}, {"c", t.c}, {"seed", t.seed}, {"bumps", bumps}};
}

inline TerrainSpec terrain_from_json(const Json& j) {
  TerrainSpec t;
  t.a = get<double>(j, "a");
  t.b = get<double>(j, "b");
  t.c = get<double>(j, "c");
  t.seed = get<std::uint64_t>(j, "seed");
  for (const auto& b : get<Json>(j, "bumps"))
    t.bumps.push_back({Vec2(get<double>(b, "cx"), get<double>(b, "cy")), get<double>(b, "amplitude"), get<double>(b, "sigma")});
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Features

inline Json features_to_json(const std::vector<Keypoint>& kps, const std::vector<Descriptor>& ds) {
  if (kps.size() != ds.size()) throw InvalidArgument("features_to_json: keypoint and descriptor counts differ");
  Json arr = Json::array();
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const auto& k = kps[i];
    Json d = Json::array();
    for (float f : ds[i]) d.push_back(f);
    arr.push_back({{"u", k.u},
                   {"v", k.v},
                   {"scale", k.scale},
                   {"orientation", k.orientation},
                   {"response", k.response},
                   {"octave", k.octave},
                   {"layer", k.layer},
                   {"descriptor", d}});
  }
  return {{"count", kps.size()}, {"features", arr}};
}

inline void features_from_json(const Json& j, std::vector<Keypoint>& kps, std::vector<Descriptor>& ds) {
  kps.clear();
  ds.clear();
  for (const auto& f : get<Json>(j, "features")) {
    Keypoint k;
    k.u = get<double>(f, "u");
    k.v = get<double>(f, "v");
    k.scale = get<double>(f, "scale");
    k.orientation = get<double>(f, "orientation");
    k.response = get<double>(f, "response");
    k.octave = get<int>(f, "octave");
    k.layer = get<double>(f, "layer");
    const auto d = get<std::vector<float>>(f, "descriptor");
    if (d.size() != 128) throw ParseError("features: descriptor must have 128 entries");
    Descriptor desc;
    std::copy(d.begin(), d.end(), desc.begin());
    kps.push_back(k);
    ds.push_back(desc);
  }
}

// ---------------------------------------------------------------------------
// Vocabulary and BoW vectors

inline Json vocabulary_to_json(const Vocabulary& v) {
  std::vector<std::uint8_t> bytes(v.words.size() * 128 * sizeof(float));
  for (std::size_t w = 0; w < v.words.size(); ++w)
    std::memcpy(bytes.data() + w * 128 * sizeof(float), v.words[w].data(), 128 * sizeof(float));
  return {{"k", v.k()},
          {"words", base64_encode(bytes.data(), bytes.size())},
          {"idf", v.idf},
          {"lambda_w", v.lambda_w},
          {"seed", v.seed}};
}

inline Vocabulary vocabulary_from_json(const Json& j) {
  Vocabulary v;
  const int k = get<int>(j, "k");
  const auto bytes = base64_decode(get<std::string>(j, "words"));
  if (k < 0 || bytes.size() != static_cast<std::size_t>(k) * 128 * sizeof(float))
    throw ParseError("vocabulary: word data does not match k");
  v.words.resize(static_cast<std::size_t>(k));
  for (std::size_t w = 0; w < v.words.size(); ++w)
    std::memcpy(v.words[w].data(), bytes.data() + w * 128 * sizeof(float), 128 * sizeof(float));
  v.idf = get<std::vector<double>>(j, "idf");
  v.lambda_w = get<std::vector<double>>(j, "lambda_w");
  v.seed = get<std::uint64_t>(j, "seed");
  v.validate();
  return v;
}

inline Json bow_to_json(const BowVector& b) {
  Json e = Json::array();
  for (const auto& x : b.entries) e.push_back({x.word, x.weight});
  return {{"entries", e}};
}

inline BowVector bow_from_json(const Json& j) {
  BowVector b;
  for (const auto& e : get<Json>(j, "entries")) {
    if (!e.is_array() || e.size() != 2) throw ParseError("bow: entries are [word, weight] pairs");
    b.entries.push_back({e[0].get<int>(), e[1].get<double>()});
  }
  for (std::size_t i = 1; i < b.entries.size(); ++i)
    if (b.entries[i].word <= b.entries[i - 1].word) throw ParseError("bow: entries must be sorted by word");
  return b;
}

// ---------------------------------------------------------------------------
// Pose graph

inline Json graph_to_json(const PoseGraph& g) {
  Json nodes = Json::array(), edges = Json::array();
  for (const auto& n : g.nodes()) nodes.push_back({{"id", n.id}, {"pose", pose_to_json(n.pose)}});
  for (const auto& e : g.edges())
    edges.push_back({{"i", e.i},
                     {"j", e.j},
                     {"kind", to_string(e.kind)},
                     {"measurement", pose_to_json(e.measurement)},
                     {"information", matrix_to_json<6>(e.information)}});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline PoseGraph graph_from_json(const Json& j) {
  PoseGraph g;
  for (const auto& n : get<Json>(j, "nodes")) g.add_node(get<int>(n, "id"), pose_from_json(get<Json>(n, "pose")));
  for (const auto& e : get<Json>(j, "edges")) {
    const auto kind = get<std::string>(e, "kind");
    if (kind != "odometry" && kind != "loop") throw ParseError("graph: unknown edge kind " + kind);
    g.add_edge({get<int>(e, "i"), get<int>(e, "j"), pose_from_json(get<Json>(e, "measurement")),
                matrix_from_json<6>(get<Json>(e, "information")), kind == "loop" ? EdgeKind::kLoop : EdgeKind::kOdometry});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Match result

inline Json match_to_json(const MatchResult& r) {
  return {{"accepted", r.accepted},
          {"reason", r.reason},
          {"feature_matches", r.feature_matches},
          {"se2", {{"theta", r.se2.transform.theta}, {"tx_px", r.se2.transform.tx}, {"ty_px", r.se2.transform.ty}}},
          {"inliers", r.se2.inliers.size()},
          {"z_off", {{"mu", r.z_off.mu}, {"var", r.z_off.var}}},
          {"pass_fraction", r.pass_fraction},
          {"pose", pose_to_json(r.relative_pose)},
          {"icp_rmse", r.icp_rmse},
          {"information", matrix_to_json<6>(r.information)}};
}

// ---------------------------------------------------------------------------
// GpgMap directory: rasters, previews, features, optional BoW vector, cloud and metadata

inline void save_gpgmap(const fs::path& dir, const GpgMap& m, bool previews = true) {
  fs::create_directories(dir);
  save_raster(dir, "elevation", m.elevation);
  save_raster(dir, "variance", m.variance);
  save_raster(dir, "gradient", m.gradient);
  save_raster(dir, "mask", m.mask);
  if (previews) {
    save_pgm(dir / "elevation.pgm", m.elevation);
    save_pgm(dir / "gradient.pgm", m.gradient);
  }
  write_json(dir / "features.json", features_to_json(m.keypoints, m.descriptors));
  if (m.bow) write_json(dir / "bow.json", bow_to_json(*m.bow));
  save_cloud(dir / "cloud.csv", m.cloud);
  write_json(dir / "map.json", Json{{"id", m.id},
                                    {"pose", pose_to_json(m.pose)},
                                    {"bounds", {m.bounds.min.x(), m.bounds.min.y(), m.bounds.max.x(), m.bounds.max.y()}},
                                    {"dropped_keypoints", m.dropped_keypoints},
                                    {"cg", {{"iterations", m.cg.iterations}, {"residual", m.cg.residual}, {"rhs_norm", m.cg.rhs_norm}}}});
}

inline GpgMap load_gpgmap(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError("not a map directory: " + dir.string());
  GpgMap m;
  const Json meta = read_json(dir / "map.json");
  m.id = get<int>(meta, "id");
  m.pose = pose_from_json(get<Json>(meta, "pose"));
  const auto b = get<std::vector<double>>(meta, "bounds");
  if (b.size() != 4) throw ParseError("map.json: bounds must have 4 entries");
  m.bounds = Aabb(Vec2(b[0], b[1]), Vec2(b[2], b[3]));
  m.dropped_keypoints = get<int>(meta, "dropped_keypoints");
  const Json cg = get<Json>(meta, "cg");
  m.cg = {get<int>(cg, "iterations"), get<double>(cg, "residual"), get<double>(cg, "rhs_norm")};
  m.elevation = load_raster<double>(dir, "elevation");
  m.variance = load_raster<double>(dir, "variance");
  m.gradient = load_raster<double>(dir, "gradient");
  m.mask = load_raster<std::uint8_t>(dir, "mask");
  if (!m.elevation.same_geometry(m.variance) || !m.elevation.same_geometry(m.gradient) || !m.elevation.same_geometry(m.mask))
    throw ParseError(dir.string() + ": rasters disagree in geometry");
  features_from_json(read_json(dir / "features.json"), m.keypoints, m.descriptors);
  if (fs::exists(dir / "bow.json")) m.bow = bow_from_json(read_json(dir / "bow.json"));
  m.cloud = load_cloud(dir / "cloud.csv");
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic dataset directory

inline std::string submap_name(int id) { return "submap_" + std::to_string(id); }

inline void save_dataset(const fs::path& dir, const SimDataset& ds) {
  fs::create_directories(dir);
  write_json(dir / "terrain.json", terrain_to_json(ds.terrain));
  Trajectory gt, odo;
  for (const auto& s : ds.submaps) {
    gt.points.push_back(trajectory_point(s.timestamp, s.gt_pose));
    odo.points.push_back(trajectory_point(s.timestamp, s.odom_pose));
    save_cloud(dir / (submap_name(s.id) + ".csv"), s.cloud);
    write_json(dir / (submap_name(s.id) + ".pose.json"),
               Json{{"id", s.id}, {"timestamp", s.timestamp}, {"pose", pose_to_json(s.gt_pose)}, {"odometry", pose_to_json(s.odom_pose)}});
  }
  save_trajectory(dir / "trajectory_gt.txt", gt);
  save_trajectory(dir / "odometry.txt", odo);
}

/// Submaps read back in id order. The ground-truth pose is optional in the pose file.
inline std::vector<SimSubmap> load_submaps(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError("not a dataset directory: " + dir.string());
  std::vector<SimSubmap> out;
  for (int id = 0;; ++id) {
    const fs::path pose_file = dir / (submap_name(id) + ".pose.json");
    if (!fs::exists(pose_file)) break;
    const Json j = read_json(pose_file);
    SimSubmap s;
    s.id = get<int>(j, "id");
    if (s.id != id) throw ParseError(pose_file.string() + ": id does not match the file name");
    s.timestamp = get<double>(j, "timestamp");
    s.odom_pose = pose_from_json(get<Json>(j, "odometry"));
    s.gt_pose = j.contains("pose") ? pose_from_json(j["pose"]) : s.odom_pose;
    s.cloud = load_cloud(dir / (submap_name(id) + ".csv"));
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ParseError(dir.string() + ": no submaps found");
  return out;
}

}  // namespace gpgm::io
