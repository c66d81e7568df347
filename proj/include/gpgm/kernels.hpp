#pragma once

#include <cmath>
#include <span>

#include <Eigen/Core>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"

namespace gpgm {

/// Squared-exponential kernel hyperparameters (meters).
struct SeKernelParams {
  double sigma_f = 0.2;
  double length_scale = 0.3;
  double sigma_z = 0.02;

  void validate() const {
    if (!(sigma_f > 0.0) || !(length_scale > 0.0) || !(sigma_z > 0.0))
      throw InvalidArgument("SeKernelParams: sigma_f, length_scale and sigma_z must be positive");
  }
  double signal_variance() const { return sigma_f * sigma_f; }
  double noise_variance() const { return sigma_z * sigma_z; }
};

namespace kernel {

inline double se(const SeKernelParams& p, const Vec2& a, const Vec2& b) {
  const double l2 = p.length_scale * p.length_scale;
  return p.signal_variance() * std::exp(-0.5 * (a - b).squaredNorm() / l2);
}

/// One-dimensional factor exp(-d^2 / 2l^2) without the signal variance.
inline double se_1d(const SeKernelParams& p, double a, double b) {
  const double d = (a - b) / p.length_scale;
  return std::exp(-0.5 * d * d);
}

/// Gradient of k(a, b) with respect to a.
inline Vec2 se_grad_first(const SeKernelParams& p, const Vec2& a, const Vec2& b) {
  const double l2 = p.length_scale * p.length_scale;
  return -(a - b) / l2 * se(p, a, b);
}

inline Eigen::MatrixXd gram(const SeKernelParams& p, std::span<const Vec2> xs, std::span<const Vec2> ys) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
  // Column-major fill order.
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (std::size_t i = 0; i < xs.size(); ++i) k(i, j) = se(p, xs[i], ys[j]);
  return k;
}

/// Lower triangle (diagonal included) of the training Gram matrix; the upper part is left unset.
inline Eigen::MatrixXd gram_lower(const SeKernelParams& p, std::span<const Vec2> xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) k(i, j) = se(p, xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
  return k;
}

}  // namespace kernel
}  // namespace gpgm
