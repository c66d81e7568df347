#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"

namespace gpgm {

struct TrajectoryPoint {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;

  void validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].t > points[i - 1].t)) throw InvalidArgument("Trajectory: timestamps must be strictly increasing");
  }

  /// Sum of distances between consecutive positions.
  double length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) s += (points[i].p - points[i - 1].p).norm();
    return s;
  }
};

/// For each estimate, the ground-truth sample with the nearest timestamp within `window` seconds.
inline std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& gt, double window = 0.05) {
  est.validate();
  gt.validate();
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (gt.points.empty()) return out;
  for (std::size_t i = 0; i < est.points.size(); ++i) {
    const double t = est.points[i].t;
    auto it = std::lower_bound(gt.points.begin(), gt.points.end(), t, [](const TrajectoryPoint& p, double v) { return p.t < v; });
    std::size_t best = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - gt.points.begin(), static_cast<std::ptrdiff_t>(gt.points.size()) - 1));
    if (best > 0 && std::abs(gt.points[best - 1].t - t) <= std::abs(gt.points[best].t - t)) --best;
    if (std::abs(gt.points[best].t - t) <= window) out.emplace_back(i, best);
  }
  return out;
}

struct Alignment {
  Trajectory aligned;  ///< estimate expressed in the ground-truth frame
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// Pins the first correspondence and rotates the estimate about it by the
/// least-squares rotation (SVD of the cross-covariance, reflection excluded).
inline Alignment align(const Trajectory& est, const Trajectory& gt, bool rotate = true, double window = 0.05) {
  Alignment a;
  a.pairs = associate(est, gt, window);
  if (a.pairs.size() < 3) throw InvalidArgument("align: at least three temporal correspondences are required");
  const Eigen::Vector3d e0 = est.points[a.pairs.front().first].p, g0 = gt.points[a.pairs.front().second].p;
  if (rotate) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& [i, j] : a.pairs) cov += (gt.points[j].p - g0) * (est.points[i].p - e0).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s(2, 2) = -1.0;
    a.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  }
  a.aligned = est;
  const Eigen::Quaterniond qr(a.rotation);
  for (auto& p : a.aligned.points) {
    p.p = a.rotation * (p.p - e0) + g0;
    p.q = (qr * p.q).normalized();
  }
  return a;
}

struct TrajectoryMetrics {
  double rmse = 0.0;
  double final_error = 0.0;
  double rmse_pct = 0.0;
  double max_err_pct = 0.0;
  int n_correspondences = 0;
};

/// Position errors over the given correspondences; percentages relative to the ground-truth length.
inline TrajectoryMetrics trajectory_metrics(const Trajectory& aligned, const Trajectory& gt,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  TrajectoryMetrics m;
  if (pairs.empty()) throw InvalidArgument("trajectory_metrics: no correspondences");
  double sse = 0.0, max_err = 0.0;
  for (const auto& [i, j] : pairs) {
    const double e = (aligned.points[i].p - gt.points[j].p).norm();
    sse += e * e;
    max_err = std::max(max_err, e);
  }
  m.n_correspondences = static_cast<int>(pairs.size());
  m.rmse = std::sqrt(sse / static_cast<double>(pairs.size()));
  m.final_error = (aligned.points[pairs.back().first].p - gt.points[pairs.back().second].p).norm();
  const double len = gt.length();
  if (len > 0.0) {
    m.rmse_pct = 100.0 * m.rmse / len;
    m.max_err_pct = 100.0 * max_err / len;
  }
  return m;
}

inline TrajectoryMetrics evaluate_trajectory(const Trajectory& est, const Trajectory& gt, double window = 0.05) {
  const Alignment a = align(est, gt, true, window);
  return trajectory_metrics(a.aligned, gt, a.pairs);
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct Curves {
  std::vector<PrPoint> pr;
  std::vector<RocPoint> roc;  ///< starts at (0, 0), ends at (1, 1)
  double roc_auc = 0.0;
  double pr_auc = 0.0;
};

/// Sweeps a threshold over the distinct scores (predict positive when score >= threshold).
inline Curves pr_roc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("pr_roc: scores and labels differ in size");
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw InvalidArgument("pr_roc: both classes are required");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  Curves c;
  c.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double thr = scores[order[k]];
    while (k < order.size() && scores[order[k]] == thr) {
      (labels[order[k]] ? tp : fp) += 1.0;
      ++k;
    }
    c.pr.push_back({thr, tp / (tp + fp), tp / pos});
    c.roc.push_back({thr, fp / neg, tp / pos});
  }
  for (std::size_t k = 1; k < c.roc.size(); ++k)
    c.roc_auc += 0.5 * (c.roc[k].fpr - c.roc[k - 1].fpr) * (c.roc[k].tpr + c.roc[k - 1].tpr);
  double prev_recall = 0.0, prev_precision = c.pr.front().precision;
  for (const auto& p : c.pr) {
    c.pr_auc += 0.5 * (p.recall - prev_recall) * (p.precision + prev_precision);
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return c;
}

}  // namespace gpgm
