#pragma once

#include <cmath>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gpgm/error.hpp"
#include "gpgm/geometry.hpp"

namespace gpgm {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

namespace so3 {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

inline Eigen::Quaterniond exp(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  if (th < 1e-12) return Eigen::Quaterniond(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z()).normalized();
  return Eigen::Quaterniond(Eigen::AngleAxisd(th, phi / th));
}

/// Rotation vector of a unit quaternion, angle in [0, pi].
inline Eigen::Vector3d log(Eigen::Quaterniond q) {
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v / q.w();
  return 2.0 * std::atan2(s, q.w()) * v / s;
}

/// Inverse of the right Jacobian of SO(3).
inline Eigen::Matrix3d right_jacobian_inv(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  if (th < 1e-6) return Eigen::Matrix3d::Identity() + 0.5 * k + k * k / 12.0;
  const double c = 1.0 / (th * th) - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  return Eigen::Matrix3d::Identity() + 0.5 * k + c * k * k;
}

}  // namespace so3

enum class EdgeKind { kOdometry, kLoop };

inline const char* to_string(EdgeKind k) { return k == EdgeKind::kOdometry ? "odometry" : "loop"; }

struct PgNode {
  int id = 0;
  Pose3 pose;
};

/// Constraint between nodes i and j. The measurement is the expected pose_i^-1 * pose_j.
struct PgEdge {
  int i = 0;
  int j = 0;
  Pose3 measurement;
  Matrix6 information = Matrix6::Identity();
  EdgeKind kind = EdgeKind::kOdometry;
};

class PoseGraph {
 public:
  void add_node(int id, const Pose3& pose) {
    if (index_.count(id)) throw InvalidArgument("PoseGraph: duplicate node id " + std::to_string(id));
    index_[id] = nodes_.size();
    nodes_.push_back({id, pose});
  }

  void add_edge(const PgEdge& e) {
    if (e.i == e.j) throw InvalidArgument("PoseGraph: edge endpoints must differ");
    if (!index_.count(e.i) || !index_.count(e.j)) throw InvalidArgument("PoseGraph: edge references an unknown node");
    if (!e.information.allFinite() || (e.information - e.information.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + e.information.cwiseAbs().maxCoeff()))
      throw InvalidArgument("PoseGraph: information must be finite and symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix6> es(e.information);
    if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff()))
      throw InvalidArgument("PoseGraph: information must be positive semi-definite");
    edges_.push_back(e);
  }

  std::size_t index_of(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("PoseGraph: unknown node id " + std::to_string(id));
    return it->second;
  }
  bool has_node(int id) const { return index_.count(id) > 0; }

  const std::vector<PgNode>& nodes() const noexcept { return nodes_; }
  std::vector<PgNode>& nodes() noexcept { return nodes_; }
  const std::vector<PgEdge>& edges() const noexcept { return edges_; }
  const Pose3& pose(int id) const { return nodes_[index_of(id)].pose; }
  void set_pose(int id, const Pose3& p) { nodes_[index_of(id)].pose = p; }

 private:
  std::vector<PgNode> nodes_;
  std::vector<PgEdge> edges_;
  std::map<int, std::size_t> index_;
};

/// [translation; rotation vector] of measurement^-1 * pose_i^-1 * pose_j.
inline Vector6d residual(const PgEdge& e, const Pose3& pi, const Pose3& pj) {
  const Pose3 err = e.measurement.inverse() * pi.inverse() * pj;
  Vector6d r;
  r.head<3>() = err.translation();
  r.tail<3>() = so3::log(err.rotation());
  return r;
}

/// Analytic Jacobians of `residual` for right perturbations T <- T * (Exp(theta), rho),
/// variables ordered [rho; theta].
inline void residual_jacobians(const PgEdge& e, const Pose3& pi, const Pose3& pj, Matrix6& ji, Matrix6& jj) {
  const Eigen::Matrix3d rz_t = e.measurement.rotation().toRotationMatrix().transpose();
  const Eigen::Matrix3d ri = pi.rotation().toRotationMatrix(), rj = pj.rotation().toRotationMatrix();
  const Eigen::Vector3d d = ri.transpose() * (pj.translation() - pi.translation());
  const Eigen::Matrix3d re = rz_t * ri.transpose() * rj;
  const Eigen::Vector3d phi = so3::log(Eigen::Quaterniond(re).normalized());
  const Eigen::Matrix3d jr_inv = so3::right_jacobian_inv(phi);

  ji.setZero();
  ji.block<3, 3>(0, 0) = -rz_t;
  ji.block<3, 3>(0, 3) = rz_t * so3::skew(d);
  ji.block<3, 3>(3, 3) = -jr_inv * rj.transpose() * ri;

  jj.setZero();
  jj.block<3, 3>(0, 0) = re;
  jj.block<3, 3>(3, 3) = jr_inv;
}

/// Right perturbation of a pose by delta = [rho; theta].
inline Pose3 retract(const Pose3& p, const Vector6d& delta) {
  return Pose3((p.rotation() * so3::exp(delta.tail<3>())).normalized(), p.translation() + p.rotation() * delta.head<3>());
}

inline double graph_cost(const PoseGraph& g) {
  double c = 0.0;
  for (const auto& e : g.edges()) {
    const Vector6d r = residual(e, g.pose(e.i), g.pose(e.j));
    c += r.dot(e.information * r);
  }
  return c;
}

struct LmOptions {
  int max_iters = 100;
  double lambda0 = 1e-4;
  double tol = 1e-10;

  void validate() const {
    if (max_iters < 1 || !(lambda0 > 0.0) || !(tol > 0.0)) throw InvalidArgument("LmOptions: max_iters >= 1, lambda0 > 0, tol > 0 required");
  }
};

struct LmReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
};

namespace pg_detail {

inline void check_connected(const PoseGraph& g) {
  const auto n = g.nodes().size();
  if (n == 0) throw InvalidArgument("optimize: empty graph");
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : g.edges()) {
    const auto a = g.index_of(e.i), b = g.index_of(e.j);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(n, 0);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto a = q.front();
    q.pop();
    for (auto b : adj[a])
      if (!seen[b]) {
        seen[b] = 1;
        ++count;
        q.push(b);
      }
  }
  if (count != n) throw InvalidArgument("optimize: pose graph is disconnected");
}

/// Gauss-Newton system over all nodes except the first (the anchor).
inline void build_system(const PoseGraph& g, Eigen::SparseMatrix<double>& h, Eigen::VectorXd& b) {
  const auto n = static_cast<Eigen::Index>(g.nodes().size());
  const Eigen::Index dim = 6 * (n - 1);
  std::vector<Eigen::Triplet<double>> trips;
  b = Eigen::VectorXd::Zero(dim);
  for (const auto& e : g.edges()) {
    const auto ia = static_cast<Eigen::Index>(g.index_of(e.i)), ib = static_cast<Eigen::Index>(g.index_of(e.j));
    const Pose3 &pi = g.nodes()[static_cast<std::size_t>(ia)].pose, &pj = g.nodes()[static_cast<std::size_t>(ib)].pose;
    Matrix6 ji, jj;
    residual_jacobians(e, pi, pj, ji, jj);
    const Vector6d r = residual(e, pi, pj);
    const Eigen::Index oa[2] = {ia - 1, ib - 1};
    const Matrix6* jac[2] = {&ji, &jj};
    for (int s = 0; s < 2; ++s) {
      if (oa[s] < 0) continue;
      b.segment<6>(6 * oa[s]) += jac[s]->transpose() * e.information * r;
      for (int t = 0; t < 2; ++t) {
        if (oa[t] < 0) continue;
        const Matrix6 blk = jac[s]->transpose() * e.information * *jac[t];
        for (int r0 = 0; r0 < 6; ++r0)
          for (int c0 = 0; c0 < 6; ++c0)
            if (blk(r0, c0) != 0.0) trips.emplace_back(6 * oa[s] + r0, 6 * oa[t] + c0, blk(r0, c0));
      }
    }
  }
  h.resize(dim, dim);
  h.setFromTriplets(trips.begin(), trips.end());
}

}  // namespace pg_detail

/// Batch Levenberg-Marquardt over SE(3) with the first node held fixed.
inline LmReport optimize(PoseGraph& g, const LmOptions& opt = {}) {
  opt.validate();
  pg_detail::check_connected(g);
  LmReport rep;
  rep.initial_cost = rep.final_cost = graph_cost(g);
  if (g.nodes().size() < 2 || rep.initial_cost == 0.0) {
    rep.converged = true;
    return rep;
  }
  double lambda = opt.lambda0;
  double cost = rep.initial_cost;
  for (int it = 0; it < opt.max_iters; ++it) {
    rep.iterations = it + 1;
    Eigen::SparseMatrix<double> h;
    Eigen::VectorXd b;
    pg_detail::build_system(g, h, b);
    bool improved = false;
    for (int attempt = 0; attempt < 20 && !improved; ++attempt) {
      Eigen::SparseMatrix<double> a = h;
      for (Eigen::Index k = 0; k < a.rows(); ++k) a.coeffRef(k, k) += lambda * (h.coeff(k, k) + 1e-12);
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
      if (solver.info() != Eigen::Success) throw Error("optimize: singular normal equations");
      const Eigen::VectorXd dx = solver.solve(-b);
      if (solver.info() != Eigen::Success || !dx.allFinite()) throw Error("optimize: singular normal equations");

      std::vector<Pose3> saved;
      for (const auto& nd : g.nodes()) saved.push_back(nd.pose);
      for (std::size_t k = 1; k < g.nodes().size(); ++k)
        g.nodes()[k].pose = retract(saved[k], dx.segment<6>(6 * static_cast<Eigen::Index>(k - 1)));
      const double new_cost = graph_cost(g);
      if (new_cost < cost) {
        improved = true;
        ++rep.accepted_steps;
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel < opt.tol || dx.norm() < 1e-12) {
          rep.converged = true;
          rep.final_cost = cost;
          return rep;
        }
      } else {
        for (std::size_t k = 0; k < saved.size(); ++k) g.nodes()[k].pose = saved[k];
        lambda *= 10.0;
      }
    }
    if (!improved) {
      rep.converged = true;  // no descent direction left at machine precision
      break;
    }
  }
  rep.final_cost = cost;
  return rep;
}

/// Marginal covariances of every node in its body frame ([rho; theta]); zero for the anchor.
inline std::vector<Matrix6> marginal_covariances(const PoseGraph& g) {
  pg_detail::check_connected(g);
  std::vector<Matrix6> out(g.nodes().size(), Matrix6::Zero());
  if (g.nodes().size() < 2) return out;
  Eigen::SparseMatrix<double> h;
  Eigen::VectorXd b;
  pg_detail::build_system(g, h, b);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
  if (solver.info() != Eigen::Success) throw Error("marginal_covariances: singular information");
  for (std::size_t k = 1; k < g.nodes().size(); ++k) {
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(h.rows(), 6);
    rhs.block<6, 6>(6 * static_cast<Eigen::Index>(k - 1), 0).setIdentity();
    const Eigen::MatrixXd x = solver.solve(rhs);
    out[k] = x.block<6, 6>(6 * static_cast<Eigen::Index>(k - 1), 0);
    out[k] = 0.5 * (out[k] + out[k].transpose()).eval();
  }
  return out;
}

/// World-frame x-y position covariance from a body-frame marginal.
inline Eigen::Matrix2d planar_position_covariance(const Pose3& pose, const Matrix6& cov) {
  const Eigen::Matrix3d r = pose.rotation().toRotationMatrix();
  return (r * cov.block<3, 3>(0, 0) * r.transpose()).block<2, 2>(0, 0);
}

}  // namespace gpgm
