#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "gpgm/raster.hpp"

namespace gpgm {

struct Keypoint {
  double u = 0.0;  ///< column, subpixel
  double v = 0.0;  ///< row, subpixel
  double scale = 1.0;
  double orientation = 0.0;
  double response = 0.0;
  int octave = 0;
  double layer = 0.0;  ///< fractional scale index inside the octave
};

using Descriptor = std::array<float, 128>;

struct SiftOptions {
  int octaves = 4;
  int scales = 3;
  double sigma0 = 1.6;
  double input_sigma = 0.5;
  double contrast = 0.02;   ///< fraction of the image dynamic range
  double edge_ratio = 10.0;
  int border = 5;
};

/// Single-channel float image used by the scale space.
struct Image {
  int w = 0, h = 0;
  std::vector<float> px;

  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : w(width), h(height), px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}
  float& at(int x, int y) { return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)]; }
  float at(int x, int y) const { return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)]; }
};

namespace sift_detail {

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

inline Image blur(const Image& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : k) x /= sum;
  Image tmp(in.w, in.h), out(in.w, in.h);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * in.at(reflect101(x + i, in.w), y);
      tmp.at(x, y) = static_cast<float>(acc);
    }
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * tmp.at(x, reflect101(y + i, in.h));
      out.at(x, y) = static_cast<float>(acc);
    }
  return out;
}

/// Keeps every second pixel starting at 0, so pixel 2i maps to i.
inline Image downsample(const Image& in) {
  Image out((in.w + 1) / 2, (in.h + 1) / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) out.at(x, y) = in.at(2 * x, 2 * y);
  return out;
}

struct ScaleSpace {
  std::vector<std::vector<Image>> gauss;  // [octave][scales + 3]
  std::vector<std::vector<Image>> dog;    // [octave][scales + 2]
};

inline ScaleSpace build_scale_space(const Image& base_in, const SiftOptions& opt) {
  ScaleSpace ss;
  const int s = opt.scales;
  const double k = std::pow(2.0, 1.0 / s);
  std::vector<double> inc(static_cast<std::size_t>(s + 3));
  inc[0] = std::sqrt(std::max(opt.sigma0 * opt.sigma0 - opt.input_sigma * opt.input_sigma, 0.01));
  for (int i = 1; i < s + 3; ++i) {
    const double prev = std::pow(k, i - 1) * opt.sigma0, total = prev * k;
    inc[static_cast<std::size_t>(i)] = std::sqrt(total * total - prev * prev);
  }
  Image base = blur(base_in, inc[0]);
  for (int o = 0; o < opt.octaves; ++o) {
    if (std::min(base.w, base.h) < 2 * opt.border + 3) break;
    std::vector<Image> g;
    g.push_back(base);
    for (int i = 1; i < s + 3; ++i) g.push_back(blur(g.back(), inc[static_cast<std::size_t>(i)]));
    std::vector<Image> d;
    for (int i = 0; i + 1 < s + 3; ++i) {
      Image diff(base.w, base.h);
      for (std::size_t p = 0; p < diff.px.size(); ++p)
        diff.px[p] = g[static_cast<std::size_t>(i + 1)].px[p] - g[static_cast<std::size_t>(i)].px[p];
      d.push_back(std::move(diff));
    }
    base = downsample(g[static_cast<std::size_t>(s)]);
    ss.gauss.push_back(std::move(g));
    ss.dog.push_back(std::move(d));
  }
  return ss;
}

inline bool is_extremum(const std::vector<Image>& dog, int l, int x, int y) {
  const float v = dog[static_cast<std::size_t>(l)].at(x, y);
  const bool want_max = v > 0.0f;
  for (int dl = -1; dl <= 1; ++dl) {
    const Image& im = dog[static_cast<std::size_t>(l + dl)];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dl == 0 && dx == 0 && dy == 0) continue;
        const float n = im.at(x + dx, y + dy);
        if (want_max ? n > v : n < v) return false;
      }
  }
  return true;
}

/// Dominant gradient orientation around (x, y) from a smoothed 36-bin histogram.
inline double dominant_orientation(const Image& g, int x, int y, double sigma) {
  constexpr int kBins = 36;
  const double ws = 1.5 * sigma;
  const int radius = static_cast<int>(std::lround(3.0 * ws));
  std::array<double, kBins> hist{};
  for (int j = -radius; j <= radius; ++j) {
    const int yy = y + j;
    if (yy <= 0 || yy >= g.h - 1) continue;
    for (int i = -radius; i <= radius; ++i) {
      const int xx = x + i;
      if (xx <= 0 || xx >= g.w - 1) continue;
      const double dx = g.at(xx + 1, yy) - g.at(xx - 1, yy);
      const double dy = g.at(xx, yy + 1) - g.at(xx, yy - 1);
      const double w = std::exp(-(i * i + j * j) / (2.0 * ws * ws));
      const double ang = std::atan2(dy, dx);
      int bin = static_cast<int>(std::lround(kBins * ang / (2.0 * std::numbers::pi)));
      bin = ((bin % kBins) + kBins) % kBins;
      hist[static_cast<std::size_t>(bin)] += w * std::hypot(dx, dy);
    }
  }
  std::array<double, kBins> sm{};
  for (int b = 0; b < kBins; ++b) {
    auto h = [&](int o) { return hist[static_cast<std::size_t>(((b + o) % kBins + kBins) % kBins)]; };
    sm[static_cast<std::size_t>(b)] = (h(-2) + h(2)) / 16.0 + (h(-1) + h(1)) * 4.0 / 16.0 + h(0) * 6.0 / 16.0;
  }
  const int best = static_cast<int>(std::max_element(sm.begin(), sm.end()) - sm.begin());
  const double l = sm[static_cast<std::size_t>((best + kBins - 1) % kBins)], c = sm[static_cast<std::size_t>(best)],
               r = sm[static_cast<std::size_t>((best + 1) % kBins)];
  const double denom = l - 2.0 * c + r;
  const double offset = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
  return normalize_angle(2.0 * std::numbers::pi * (best + offset) / kBins);
}

}  // namespace sift_detail

/// Scales a raster into [0, 1] using the range over mask-true cells (whole raster if no
/// mask or an empty mask). Returns false for a constant image.
inline bool normalized_image(const Raster<double>& r, const Raster<std::uint8_t>* mask, Image& out) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const bool use_mask = mask != nullptr && std::any_of(mask->values.begin(), mask->values.end(), [](auto m) { return m != 0; });
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (use_mask && mask->values[i] == 0) continue;
    lo = std::min(lo, r.values[i]);
    hi = std::max(hi, r.values[i]);
  }
  out = Image(r.width, r.height);
  if (!(hi > lo)) return false;
  for (std::size_t i = 0; i < r.values.size(); ++i)
    out.px[i] = static_cast<float>(std::clamp((r.values[i] - lo) / (hi - lo), -0.5, 1.5));
  return true;
}

struct DetectionResult {
  std::vector<Keypoint> keypoints;
  sift_detail::ScaleSpace space;
};

/// Difference-of-Gaussians keypoints, subpixel refined, contrast and edge filtered,
/// restricted to mask-true pixels and sorted by response (descending).
inline DetectionResult detect_keypoints_full(const Raster<double>& image, const Raster<std::uint8_t>* mask,
                                             const SiftOptions& opt = {}) {
  using namespace sift_detail;
  if (mask != nullptr && !mask->same_geometry(image)) throw InvalidArgument("detect_keypoints: mask geometry mismatch");
  DetectionResult res;
  Image base;
  if (!normalized_image(image, mask, base)) return res;
  res.space = build_scale_space(base, opt);
  const int s = opt.scales;
  std::set<std::tuple<int, int, int, int>> seen;

  for (std::size_t o = 0; o < res.space.dog.size(); ++o) {
    const auto& dog = res.space.dog[o];
    const int w = dog[0].w, h = dog[0].h;
    const double oscale = std::ldexp(1.0, static_cast<int>(o));
    for (int l0 = 1; l0 <= s; ++l0) {
      for (int y0 = opt.border; y0 < h - opt.border; ++y0) {
        for (int x0 = opt.border; x0 < w - opt.border; ++x0) {
          const float v0 = dog[static_cast<std::size_t>(l0)].at(x0, y0);
          if (std::abs(v0) < 0.5 * opt.contrast) continue;
          if (!is_extremum(dog, l0, x0, y0)) continue;

          int x = x0, y = y0, l = l0;
          Eigen::Vector3d offset = Eigen::Vector3d::Zero(), grad = Eigen::Vector3d::Zero();
          bool ok = false;
          for (int iter = 0; iter < 5; ++iter) {
            const Image &cur = dog[static_cast<std::size_t>(l)], &prv = dog[static_cast<std::size_t>(l - 1)],
                        &nxt = dog[static_cast<std::size_t>(l + 1)];
            const double c = cur.at(x, y);
            grad = Eigen::Vector3d(0.5 * (cur.at(x + 1, y) - cur.at(x - 1, y)), 0.5 * (cur.at(x, y + 1) - cur.at(x, y - 1)),
                                   0.5 * (nxt.at(x, y) - prv.at(x, y)));
            Eigen::Matrix3d hess;
            hess(0, 0) = cur.at(x + 1, y) + cur.at(x - 1, y) - 2 * c;
            hess(1, 1) = cur.at(x, y + 1) + cur.at(x, y - 1) - 2 * c;
            hess(2, 2) = nxt.at(x, y) + prv.at(x, y) - 2 * c;
            hess(0, 1) = hess(1, 0) =
                0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
            hess(0, 2) = hess(2, 0) = 0.25 * (nxt.at(x + 1, y) - nxt.at(x - 1, y) - prv.at(x + 1, y) + prv.at(x - 1, y));
            hess(1, 2) = hess(2, 1) = 0.25 * (nxt.at(x, y + 1) - nxt.at(x, y - 1) - prv.at(x, y + 1) + prv.at(x, y - 1));
            const auto lu = hess.fullPivLu();
            if (!lu.isInvertible()) break;
            offset = -lu.solve(grad);
            if (offset.cwiseAbs().maxCoeff() < 0.5) {
              ok = true;
              break;
            }
            if (offset.cwiseAbs().maxCoeff() > 1e3) break;
            x += static_cast<int>(std::lround(offset.x()));
            y += static_cast<int>(std::lround(offset.y()));
            l += static_cast<int>(std::lround(offset.z()));
            if (l < 1 || l > s || x < opt.border || x >= w - opt.border || y < opt.border || y >= h - opt.border) break;
          }
          if (!ok) continue;

          const Image& cur = dog[static_cast<std::size_t>(l)];
          const double contrast = cur.at(x, y) + 0.5 * grad.dot(offset);
          if (std::abs(contrast) < opt.contrast) continue;
          const double dxx = cur.at(x + 1, y) + cur.at(x - 1, y) - 2.0 * cur.at(x, y);
          const double dyy = cur.at(x, y + 1) + cur.at(x, y - 1) - 2.0 * cur.at(x, y);
          const double dxy = 0.25 * (cur.at(x + 1, y + 1) - cur.at(x - 1, y + 1) - cur.at(x + 1, y - 1) + cur.at(x - 1, y - 1));
          const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
          const double r = opt.edge_ratio;
          if (det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det) continue;
          if (!seen.insert({static_cast<int>(o), l, x, y}).second) continue;

          Keypoint kp;
          kp.u = (x + offset.x()) * oscale;
          kp.v = (y + offset.y()) * oscale;
          kp.layer = l + offset.z();
          kp.octave = static_cast<int>(o);
          kp.scale = opt.sigma0 * std::pow(2.0, kp.layer / s) * oscale;
          kp.response = std::abs(contrast);
          if (mask != nullptr) {
            const int mu = static_cast<int>(std::lround(kp.u)), mv = static_cast<int>(std::lround(kp.v));
            if (!mask->in_bounds(mu, mv) || mask->at(mu, mv) == 0) continue;
          }
          const double sigma_oct = opt.sigma0 * std::pow(2.0, kp.layer / s);
          kp.orientation = dominant_orientation(res.space.gauss[o][static_cast<std::size_t>(l)], x, y, sigma_oct);
          res.keypoints.push_back(kp);
        }
      }
    }
  }
  std::stable_sort(res.keypoints.begin(), res.keypoints.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.v != b.v) return a.v < b.v;
    if (a.u != b.u) return a.u < b.u;
    return a.scale < b.scale;
  });
  return res;
}

inline std::vector<Keypoint> detect_keypoints(const Raster<double>& image, const Raster<std::uint8_t>* mask,
                                              const SiftOptions& opt = {}) {
  return detect_keypoints_full(image, mask, opt).keypoints;
}

struct DescriptorResult {
  std::vector<Keypoint> keypoints;  ///< keypoints that received a descriptor
  std::vector<Descriptor> descriptors;
  int dropped = 0;                  ///< keypoints whose window left the image
};

namespace sift_detail {

constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr double kDescScale = 3.0;

/// 4x4x8 orientation histograms of the local image gradient, rotated into the
/// keypoint frame. Returns false if the sampling window leaves the image.
inline bool describe(const Image& g, double x, double y, double sigma, double ori, Descriptor& out) {
  const int d = kDescWidth, n = kDescBins;
  const double hist_width = kDescScale * sigma;
  const double support = hist_width * (d / 2.0 + 0.5) * std::sqrt(2.0);
  const int radius = static_cast<int>(std::ceil(support));
  const int xi = static_cast<int>(std::lround(x)), yi = static_cast<int>(std::lround(y));
  if (xi - radius < 1 || yi - radius < 1 || xi + radius > g.w - 2 || yi + radius > g.h - 2) return false;

  const double cos_t = std::cos(ori) / hist_width, sin_t = std::sin(ori) / hist_width;
  const double exp_scale = -1.0 / (d * d * 0.5);
  std::vector<double> hist(static_cast<std::size_t>((d + 2) * (d + 2) * (n + 2)), 0.0);
  auto hidx = [&](int r, int c, int o) { return static_cast<std::size_t>(((r * (d + 2)) + c) * (n + 2) + o); };

  for (int j = -radius; j <= radius; ++j) {
    for (int i = -radius; i <= radius; ++i) {
      // Rotate the offset into the keypoint frame (by -ori) in histogram-bin units.
      const double c_rot = i * cos_t + j * sin_t;
      const double r_rot = -i * sin_t + j * cos_t;
      const double rbin = r_rot + d / 2.0 - 0.5, cbin = c_rot + d / 2.0 - 0.5;
      if (!(rbin > -1.0 && rbin < d && cbin > -1.0 && cbin < d)) continue;
      const int xx = xi + i, yy = yi + j;
      const double dx = g.at(xx + 1, yy) - g.at(xx - 1, yy);
      const double dy = g.at(xx, yy + 1) - g.at(xx, yy - 1);
      const double mag = std::hypot(dx, dy) * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
      double obin = (std::atan2(dy, dx) - ori) * n / (2.0 * std::numbers::pi);
      obin = std::fmod(obin, static_cast<double>(n));
      if (obin < 0) obin += n;

      const int r0 = static_cast<int>(std::floor(rbin)), c0 = static_cast<int>(std::floor(cbin)),
                o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      for (int dr = 0; dr <= 1; ++dr) {
        const double wr = dr ? fr : 1.0 - fr;
        for (int dc = 0; dc <= 1; ++dc) {
          const double wc = dc ? fc : 1.0 - fc;
          for (int dob = 0; dob <= 1; ++dob) {
            const double wo = dob ? fo : 1.0 - fo;
            hist[hidx(r0 + dr + 1, c0 + dc + 1, o0 + dob)] += mag * wr * wc * wo;
          }
        }
      }
    }
  }

  std::array<double, 128> raw{};
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      // Orientation bins wrap around.
      hist[hidx(r + 1, c + 1, 0)] += hist[hidx(r + 1, c + 1, n)];
      for (int o = 0; o < n; ++o) raw[static_cast<std::size_t>((r * d + c) * n + o)] = hist[hidx(r + 1, c + 1, o)];
    }
  double norm = 0.0;
  for (double v : raw) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) return false;
  for (double& v : raw) v = std::min(v / norm, 0.2);
  norm = 0.0;
  for (double v : raw) norm += v * v;
  norm = std::sqrt(norm);
  for (std::size_t k = 0; k < 128; ++k) out[k] = static_cast<float>(raw[k] / norm);
  return true;
}

}  // namespace sift_detail

/// Descriptors for detected keypoints, computed on the Gaussian level each keypoint
/// was found at. Keypoints whose window leaves the image are dropped and counted.
inline DescriptorResult compute_descriptors(const DetectionResult& det, const SiftOptions& opt = {}) {
  DescriptorResult out;
  for (const auto& kp : det.keypoints) {
    const auto o = static_cast<std::size_t>(kp.octave);
    const int l = std::clamp(static_cast<int>(std::lround(kp.layer)), 0, opt.scales + 2);
    const Image& g = det.space.gauss[o][static_cast<std::size_t>(l)];
    const double oscale = std::ldexp(1.0, kp.octave);
    Descriptor d;
    if (sift_detail::describe(g, kp.u / oscale, kp.v / oscale, kp.scale / oscale, kp.orientation, d)) {
      out.keypoints.push_back(kp);
      out.descriptors.push_back(d);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

/// Detection followed by description.
inline DescriptorResult extract_features(const Raster<double>& image, const Raster<std::uint8_t>* mask,
                                         const SiftOptions& opt = {}) {
  return compute_descriptors(detect_keypoints_full(image, mask, opt), opt);
}

inline double l1_distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k]));
  return s;
}

struct FeatureMatch {
  int first = 0;   ///< index into the first descriptor set
  int second = 0;  ///< index into the second descriptor set
  double distance = 0.0;
};

enum class MatchKind { kBidirectional, kRatio };

struct MatchStrategy {
  MatchKind kind = MatchKind::kBidirectional;
  double ratio = 0.8;
};

/// Exhaustive L1 matching. Bidirectional keeps mutual nearest neighbours; the ratio
/// test keeps a nearest neighbour when d1 / d2 < ratio. Every index is used at most once.
inline std::vector<FeatureMatch> match_features(const std::vector<Descriptor>& f1, const std::vector<Descriptor>& f2,
                                                const MatchStrategy& strategy = {}) {
  std::vector<FeatureMatch> out;
  if (f1.empty() || f2.empty()) return out;
  const std::size_t n1 = f1.size(), n2 = f2.size();
  std::vector<double> dist(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) dist[i * n2 + j] = l1_distance(f1[i], f2[j]);

  auto nearest_in_2 = [&](std::size_t i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n2; ++j)
      if (dist[i * n2 + j] < dist[i * n2 + best]) best = j;
    return best;
  };

  if (strategy.kind == MatchKind::kBidirectional) {
    std::vector<std::size_t> back(n2, 0);
    for (std::size_t j = 0; j < n2; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n1; ++i)
        if (dist[i * n2 + j] < dist[best * n2 + j]) best = i;
      back[j] = best;
    }
    for (std::size_t i = 0; i < n1; ++i) {
      const std::size_t j = nearest_in_2(i);
      if (back[j] == i) out.push_back({static_cast<int>(i), static_cast<int>(j), dist[i * n2 + j]});
    }
    return out;
  }

  if (n2 < 2) return out;
  std::vector<int> owner(n2, -1);
  std::vector<FeatureMatch> cand(n1, FeatureMatch{-1, -1, 0.0});
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t j1 = nearest_in_2(i);
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n2; ++j)
      if (j != j1) d2 = std::min(d2, dist[i * n2 + j]);
    const double d1 = dist[i * n2 + j1];
    if (!(d1 < strategy.ratio * d2)) continue;
    const int prev = owner[j1];
    if (prev >= 0 && cand[static_cast<std::size_t>(prev)].distance <= d1) continue;
    if (prev >= 0) cand[static_cast<std::size_t>(prev)].first = -1;
    owner[j1] = static_cast<int>(i);
    cand[i] = {static_cast<int>(i), static_cast<int>(j1), d1};
  }
  for (const auto& c : cand)
    if (c.first >= 0) out.push_back(c);
  return out;
}

}  // namespace gpgm
