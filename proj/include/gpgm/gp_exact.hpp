#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"
#include "gpgm/kernels.hpp"

namespace gpgm {

/// Dense GP regression with a cached Cholesky factor. Cubic in the number of
/// observations; used as the reference for the interpolated solver.
class ExactGp {
 public:
  static constexpr std::size_t kDefaultCap = 3000;

  ExactGp(std::span<const Vec2> xs, std::span<const double> zs, const SeKernelParams& params,
          std::size_t cap = kDefaultCap)
      : params_(params), xs_(xs.begin(), xs.end()) {
    params_.validate();
    if (xs.size() != zs.size()) throw InvalidArgument("fit_exact: input and target sizes differ");
    if (xs.empty()) throw InvalidArgument("fit_exact: no observations");
    if (xs.size() > cap) throw InvalidArgument("fit_exact: observation count exceeds cap");

    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zs.data(), n);
    z_mean_ = z.mean();
    z.array() -= z_mean_;

    // LLT reads only the lower triangle.
    Eigen::MatrixXd k = kernel::gram_lower(params_, xs_);
    k.diagonal().array() += params_.noise_variance();
    factor_.compute(k);
    if (factor_.info() != Eigen::Success) throw Error("fit_exact: Cholesky factorization failed");
    alpha_ = factor_.solve(z);
  }

  double mean(const Vec2& x) const { return z_mean_ + cross(x).dot(alpha_); }

  double variance(const Vec2& x) const {
    const Eigen::VectorXd kx = cross(x);
    const Eigen::VectorXd v = factor_.matrixL().solve(kx);
    return params_.signal_variance() - v.squaredNorm();
  }

  /// Gradient of the posterior mean (the constant offset contributes nothing).
  Vec2 derivative(const Vec2& x) const {
    Vec2 g = Vec2::Zero();
    for (std::size_t i = 0; i < xs_.size(); ++i)
      g += kernel::se_grad_first(params_, x, xs_[i]) * alpha_[static_cast<Eigen::Index>(i)];
    return g;
  }

  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  double z_mean() const noexcept { return z_mean_; }
  const SeKernelParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return xs_.size(); }

 private:
  Eigen::VectorXd cross(const Vec2& x) const {
    Eigen::VectorXd kx(static_cast<Eigen::Index>(xs_.size()));
    for (std::size_t i = 0; i < xs_.size(); ++i) kx[static_cast<Eigen::Index>(i)] = kernel::se(params_, x, xs_[i]);
    return kx;
  }

  SeKernelParams params_;
  std::vector<Vec2> xs_;
  double z_mean_ = 0.0;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

inline ExactGp fit_exact(std::span<const Vec2> xs, std::span<const double> zs, const SeKernelParams& params,
                         std::size_t cap = ExactGp::kDefaultCap) {
  return ExactGp(xs, zs, params, cap);
}

}  // namespace gpgm
