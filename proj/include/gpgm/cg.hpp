#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "gpgm/error.hpp"

namespace gpgm {

enum class Preconditioner { kNone, kDiagonal };

struct CgOptions {
  double rel_tol = 1e-6;
  int max_iters = 1000;
  Preconditioner preconditioner = Preconditioner::kNone;

  void validate() const {
    if (!(rel_tol > 0.0)) throw InvalidArgument("CgOptions: rel_tol must be positive");
    if (max_iters < 1) throw InvalidArgument("CgOptions: max_iters must be >= 1");
  }
};

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  ///< true residual norm ||A x - b|| at exit
  bool converged = false;
};

/// Conjugate gradient for a symmetric positive definite operator given as a
/// matrix-vector product. `diagonal` is used only with the diagonal preconditioner.
/// Non-convergence is reported through the result, not thrown.
template <typename MatVec>
CgResult cg_solve(MatVec&& apply, const Eigen::VectorXd& b, const CgOptions& opts,
                  const Eigen::VectorXd* diagonal = nullptr) {
  opts.validate();
  const bool precond = opts.preconditioner == Preconditioner::kDiagonal;
  if (precond && (diagonal == nullptr || diagonal->size() != b.size()))
    throw InvalidArgument("cg_solve: diagonal preconditioner requires the operator diagonal");

  CgResult res;
  res.x = Eigen::VectorXd::Zero(b.size());
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    res.converged = true;
    return res;
  }
  const double target = opts.rel_tol * b_norm;

  auto precondition = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    if (!precond) return r;
    return r.cwiseQuotient(*diagonal);
  };

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  Eigen::VectorXd ap(b.size());

  int it = 0;
  double r_norm = b_norm;
  while (it < opts.max_iters && r_norm > target) {
    ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw Error("cg_solve: operator is not positive definite");
    const double step = rz / pap;
    res.x += step * p;
    r -= step * ap;
    r_norm = r.norm();
    ++it;
    if (r_norm <= target) break;
    z = precondition(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.iterations = it;
  res.residual = (apply(res.x) - b).norm();
  res.converged = res.residual <= target;
  return res;
}

}  // namespace gpgm
