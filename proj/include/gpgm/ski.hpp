#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gpgm/cg.hpp"
#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"
#include "gpgm/kernels.hpp"

namespace gpgm {

/// Regular lattice of inducing points. Node (i, j) sits at origin + spacing * (i, j);
/// flat index is i + nx * j.
struct InducingGrid {
  Vec2 origin{0.0, 0.0};
  double spacing = 1.0;
  int nx = 0;
  int ny = 0;

  static constexpr std::size_t kDefaultMaxNodes = 4'000'000;

  std::size_t size() const noexcept { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  Vec2 node(int i, int j) const { return origin + spacing * Vec2(i, j); }
  Vec2 node(std::size_t flat) const {
    return node(static_cast<int>(flat % static_cast<std::size_t>(nx)), static_cast<int>(flat / static_cast<std::size_t>(nx)));
  }
  /// Continuous grid coordinates of a point.
  Vec2 to_grid(const Vec2& x) const { return (x - origin) / spacing; }
};

/// Axis-aligned grid covering `bounds` expanded by `margin`, with its origin on a
/// multiple of `spacing`.
inline InducingGrid build_grid(const Aabb& bounds, double spacing, double margin,
                               std::size_t max_nodes = InducingGrid::kDefaultMaxNodes) {
  if (!(spacing > 0.0)) throw InvalidArgument("build_grid: spacing must be positive");
  if (margin < 0.0) throw InvalidArgument("build_grid: margin must be non-negative");
  const Vec2 lo = bounds.min - Vec2::Constant(margin);
  const Vec2 hi = bounds.max + Vec2::Constant(margin);
  InducingGrid g;
  g.spacing = spacing;
  g.origin = Vec2(std::floor(lo.x() / spacing) * spacing, std::floor(lo.y() / spacing) * spacing);
  const double ex = std::ceil((hi.x() - g.origin.x()) / spacing - 1e-9);
  const double ey = std::ceil((hi.y() - g.origin.y()) / spacing - 1e-9);
  if (ex + 1.0 > 1e9 || ey + 1.0 > 1e9 || (ex + 1.0) * (ey + 1.0) > static_cast<double>(max_nodes))
    throw InvalidArgument("build_grid: inducing grid exceeds the node budget");
  g.nx = std::max(4, static_cast<int>(ex) + 1);
  g.ny = std::max(4, static_cast<int>(ey) + 1);
  return g;
}

namespace detail {

constexpr double kCubicA = -0.5;

/// Keys cubic convolution kernel and its derivative, evaluated at signed offset s.
inline void cubic_conv(double s, double& w, double& dw) {
  const double a = kCubicA;
  const double t = std::abs(s);
  const double sgn = s < 0.0 ? -1.0 : 1.0;
  if (t <= 1.0) {
    w = (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    dw = sgn * (3.0 * (a + 2.0) * t * t - 2.0 * (a + 3.0) * t);
  } else if (t < 2.0) {
    w = a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    dw = sgn * (3.0 * a * t * t - 10.0 * a * t + 8.0 * a);
  } else {
    w = 0.0;
    dw = 0.0;
  }
}

}  // namespace detail

/// Sparse interpolation row: 16 node indices with weights and their spatial derivatives.
struct InterpRow {
  std::array<int, 16> index{};
  std::array<double, 16> w{};
  std::array<double, 16> dx{};
  std::array<double, 16> dy{};
};

/// Tensor-product cubic convolution weights at `x`. Throws when the 4x4 stencil
/// would leave the grid.
inline InterpRow interp_weights(const InducingGrid& grid, const Vec2& x) {
  const Vec2 t = grid.to_grid(x);
  const double fx0 = std::floor(t.x()), fy0 = std::floor(t.y());
  if (!std::isfinite(fx0) || !std::isfinite(fy0) || fx0 < 1.0 || fy0 < 1.0 || fx0 + 2.0 > grid.nx - 1 ||
      fy0 + 2.0 > grid.ny - 1)
    throw InvalidArgument("interp_weights: query too close to the inducing grid boundary");
  const int ix = static_cast<int>(fx0), iy = static_cast<int>(fy0);
  const double fx = t.x() - fx0, fy = t.y() - fy0;

  std::array<double, 4> wx{}, dwx{}, wy{}, dwy{};
  for (int k = 0; k < 4; ++k) {
    detail::cubic_conv(fx - (k - 1), wx[k], dwx[k]);
    detail::cubic_conv(fy - (k - 1), wy[k], dwy[k]);
  }
  const double inv_h = 1.0 / grid.spacing;
  InterpRow row;
  for (int b = 0; b < 4; ++b) {
    for (int a = 0; a < 4; ++a) {
      const int k = a + 4 * b;
      row.index[k] = (ix - 1 + a) + grid.nx * (iy - 1 + b);
      row.w[k] = wx[a] * wy[b];
      row.dx[k] = dwx[a] * wy[b] * inv_h;
      row.dy[k] = wx[a] * dwy[b] * inv_h;
    }
  }
  return row;
}

/// One-dimensional SE factor matrix over `n` equally spaced nodes (without sigma_f^2).
inline Eigen::MatrixXd se_axis_matrix(const SeKernelParams& p, int n, double spacing) {
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = kernel::se_1d(p, i * spacing, j * spacing);
  return k;
}

/// K_UU * v through the separable structure K_UU = sigma_f^2 (Ky kron Kx).
inline Eigen::VectorXd kuu_matvec_kron(const InducingGrid& grid, const SeKernelParams& params,
                                       const Eigen::VectorXd& v, const Eigen::MatrixXd& kx,
                                       const Eigen::MatrixXd& ky) {
  if (v.size() != static_cast<Eigen::Index>(grid.size())) throw InvalidArgument("kuu_matvec: size mismatch");
  Eigen::Map<const Eigen::MatrixXd> vm(v.data(), grid.nx, grid.ny);
  Eigen::VectorXd out(v.size());
  Eigen::Map<Eigen::MatrixXd> om(out.data(), grid.nx, grid.ny);
  om.noalias() = kx * vm;
  om = (om * ky).eval();  // ky is symmetric
  out *= params.signal_variance();
  return out;
}

inline Eigen::VectorXd kuu_matvec_kron(const InducingGrid& grid, const SeKernelParams& params,
                                       const Eigen::VectorXd& v) {
  return kuu_matvec_kron(grid, params, v, se_axis_matrix(params, grid.nx, grid.spacing),
                         se_axis_matrix(params, grid.ny, grid.spacing));
}

inline Eigen::MatrixXd kuu_dense(const InducingGrid& grid, const SeKernelParams& params) {
  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      k(a, b) = kernel::se(params, grid.node(static_cast<std::size_t>(a)), grid.node(static_cast<std::size_t>(b)));
  return k;
}

/// The regularized interpolated covariance W K_UU W^T + sigma_z^2 I as a linear operator.
class SkiOperator {
 public:
  static constexpr std::size_t kDenseBelow = 64;

  SkiOperator(const InducingGrid& grid, const SeKernelParams& params, std::vector<InterpRow> rows)
      : grid_(grid), params_(params), rows_(std::move(rows)) {
    if (grid_.size() < kDenseBelow) {
      dense_ = kuu_dense(grid_, params_);
    } else {
      kx_ = se_axis_matrix(params_, grid_.nx, grid_.spacing);
      ky_ = se_axis_matrix(params_, grid_.ny, grid_.spacing);
    }
  }

  Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(rows_.size()); }
  const std::vector<InterpRow>& interp_rows() const noexcept { return rows_; }

  Eigen::VectorXd kuu(const Eigen::VectorXd& v) const {
    if (dense_.size() > 0) return dense_ * v;
    return kuu_matvec_kron(grid_, params_, v, kx_, ky_);
  }

  /// W^T v, scattered onto the grid.
  Eigen::VectorXd scatter(const Eigen::VectorXd& v) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const auto& row = rows_[r];
      const double vr = v[static_cast<Eigen::Index>(r)];
      for (int k = 0; k < 16; ++k) g[row.index[k]] += row.w[k] * vr;
    }
    return g;
  }

  /// W g, gathered at the training inputs.
  Eigen::VectorXd gather(const Eigen::VectorXd& g) const {
    Eigen::VectorXd out(rows());
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const auto& row = rows_[r];
      double s = 0.0;
      for (int k = 0; k < 16; ++k) s += row.w[k] * g[row.index[k]];
      out[static_cast<Eigen::Index>(r)] = s;
    }
    return out;
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const {
    return gather(kuu(scatter(v))) + params_.noise_variance() * v;
  }

  /// Diagonal of the operator, for Jacobi preconditioning.
  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(rows());
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      const auto& row = rows_[r];
      double s = 0.0;
      for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b)
          s += row.w[a] * row.w[b] *
               kernel::se(params_, grid_.node(static_cast<std::size_t>(row.index[a])),
                          grid_.node(static_cast<std::size_t>(row.index[b])));
      d[static_cast<Eigen::Index>(r)] = s + params_.noise_variance();
    }
    return d;
  }

 private:
  InducingGrid grid_;
  SeKernelParams params_;
  std::vector<InterpRow> rows_;
  Eigen::MatrixXd kx_, ky_, dense_;
};

struct CgStats {
  int iterations = 0;
  double residual = 0.0;
  double rhs_norm = 0.0;
};

/// Elevation confidence and variance-like proxy at a query point.
struct VarianceProxy {
  double confidence = 0.0;  ///< k(x, x~)
  double variance = 0.0;    ///< sigma_f^2 + sigma_z^2 - k(x, x~)
};

struct SkiPrediction {
  double mean = 0.0;
  Vec2 gradient{0.0, 0.0};
};

/// Fitted SKI regressor. Predictions touch at most 16 precomputed inducing coefficients.
class SkiModel {
 public:
  SkiModel(const InducingGrid& grid, const SeKernelParams& params, double z_mean, Eigen::VectorXd u_coeffs,
           std::vector<Vec2> train_xy, CgStats stats)
      : grid_(grid),
        params_(params),
        z_mean_(z_mean),
        u_(std::move(u_coeffs)),
        train_xy_(std::move(train_xy)),
        tree_(train_xy_),
        stats_(stats) {}

  double mean(const Vec2& x) const {
    const InterpRow row = interp_weights(grid_, x);
    double s = 0.0;
    for (int k = 0; k < 16; ++k) s += row.w[k] * u_[row.index[k]];
    return z_mean_ + s;
  }

  Vec2 derivative(const Vec2& x) const {
    const InterpRow row = interp_weights(grid_, x);
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 16; ++k) {
      g.x() += row.dx[k] * u_[row.index[k]];
      g.y() += row.dy[k] * u_[row.index[k]];
    }
    return g;
  }

  SkiPrediction predict(const Vec2& x) const {
    const InterpRow row = interp_weights(grid_, x);
    SkiPrediction p;
    double s = 0.0;
    for (int k = 0; k < 16; ++k) {
      const double u = u_[row.index[k]];
      s += row.w[k] * u;
      p.gradient.x() += row.dx[k] * u;
      p.gradient.y() += row.dy[k] * u;
    }
    p.mean = z_mean_ + s;
    return p;
  }

  /// Kernel between `x` and the centroid of training inputs within `radius`
  /// (nearest training input when the disc is empty).
  VarianceProxy variance_proxy(const Vec2& x, double radius) const {
    if (!(radius > 0.0)) throw InvalidArgument("variance_proxy: radius must be positive");
    const std::vector<int> near = tree_.radius_query(x, radius);
    Vec2 centroid = Vec2::Zero();
    if (near.empty()) {
      centroid = train_xy_[static_cast<std::size_t>(tree_.nearest(x))];
    } else {
      for (int i : near) centroid += train_xy_[static_cast<std::size_t>(i)];
      centroid /= static_cast<double>(near.size());
    }
    VarianceProxy v;
    v.confidence = kernel::se(params_, x, centroid);
    v.variance = params_.signal_variance() + params_.noise_variance() - v.confidence;
    return v;
  }

  const InducingGrid& grid() const noexcept { return grid_; }
  const SeKernelParams& params() const noexcept { return params_; }
  double z_mean() const noexcept { return z_mean_; }
  const Eigen::VectorXd& u_coeffs() const noexcept { return u_; }
  const std::vector<Vec2>& train_xy() const noexcept { return train_xy_; }
  const KdTree2& tree() const noexcept { return tree_; }
  const CgStats& cg_stats() const noexcept { return stats_; }

 private:
  InducingGrid grid_;
  SeKernelParams params_;
  double z_mean_;
  Eigen::VectorXd u_;
  std::vector<Vec2> train_xy_;
  KdTree2 tree_;
  CgStats stats_;
};

/// Fits the interpolated GP: alpha = (W K_UU W^T + sigma_z^2 I)^-1 (z - mean(z)) by CG,
/// then caches u = K_UU W^T alpha. Throws ConvergenceError if CG misses its tolerance.
inline SkiModel fit_ski(std::span<const Vec2> xs, std::span<const double> zs, const SeKernelParams& params,
                        const InducingGrid& grid, const CgOptions& opts = {}) {
  params.validate();
  opts.validate();
  if (xs.size() != zs.size()) throw InvalidArgument("fit_ski: input and target sizes differ");
  if (xs.empty()) throw InvalidArgument("fit_ski: no observations");

  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zs.data(), n);
  const double z_mean = z.mean();
  z.array() -= z_mean;

  std::vector<InterpRow> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) rows.push_back(interp_weights(grid, x));
  const SkiOperator op(grid, params, std::move(rows));

  Eigen::VectorXd diag;
  if (opts.preconditioner == Preconditioner::kDiagonal) diag = op.diagonal();
  const CgResult cg = cg_solve(op, z, opts, opts.preconditioner == Preconditioner::kDiagonal ? &diag : nullptr);
  CgStats stats{cg.iterations, cg.residual, z.norm()};
  if (!cg.converged)
    throw ConvergenceError("fit_ski: conjugate gradient did not converge", cg.residual, cg.iterations);

  Eigen::VectorXd u = op.kuu(op.scatter(cg.x));
  return SkiModel(grid, params, z_mean, std::move(u), std::vector<Vec2>(xs.begin(), xs.end()), stats);
}

inline double gradient_magnitude(double gx, double gy) { return std::hypot(gx, gy); }

}  // namespace gpgm
