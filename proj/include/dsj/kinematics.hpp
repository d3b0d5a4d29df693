#pragma once

// Planar two-link finger kinematics and the task-space stiffness seen along the
// grasp direction, including the force-dependent terms from the derivatives of
// the finger Jacobian and of the task projection.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dsj/errors.hpp"
#include "dsj/linalg.hpp"
#include "dsj/model.hpp"

namespace dsj {

/// How the scalar grasp coordinate is measured.
/// fixed: along a constant unit direction, so dJ_p^T/dx = 0.
/// object_normal: along the inward normal of a round object centred at `center`,
/// u(x) = (center - x) / |center - x|, which makes J_p depend on the fingertip position.
struct GraspFrame {
  GraspMode mode = GraspMode::fixed;
  Eigen::Vector2d direction = Eigen::Vector2d(1.0, 0.0);
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  static GraspFrame fixed(const Eigen::Vector2d& d) { return {GraspMode::fixed, d, Eigen::Vector2d::Zero()}; }
  static GraspFrame object_normal(const Eigen::Vector2d& c) { return {GraspMode::object_normal, Eigen::Vector2d::Zero(), c}; }
};

struct JacobianBundle {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();  // fingertip position
  Eigen::Matrix2d J = Eigen::Matrix2d::Zero();  // dx/dq
  std::array<Eigen::Matrix2d, 2> dJT_dq{};      // [k] = d(J^T)/dq_k
  Eigen::RowVector2d J_p = Eigen::RowVector2d::Zero();  // dp/dx
  std::array<Eigen::Vector2d, 2> dJpT_dx{};     // [m] = d(J_p^T)/dx_m
};

inline Eigen::Vector2d forward_kinematics(const FingerGeometry& g, const Eigen::Vector2d& q) {
  const double a1 = g.base.theta + q(0);
  const double a12 = a1 + q(1);
  const double l1 = g.link_lengths(0), l2 = g.link_lengths(1);
  return {g.base.x + l1 * std::cos(a1) + l2 * std::cos(a12), g.base.y + l1 * std::sin(a1) + l2 * std::sin(a12)};
}

inline Eigen::Vector2d forward_kinematics(const FingerGeometry& g, const Eigen::VectorXd& q) {
  if (q.size() != 2) throw ShapeError("planar finger expects 2 joint angles");
  return forward_kinematics(g, Eigen::Vector2d(q(0), q(1)));
}

inline JacobianBundle jacobians(const FingerGeometry& g, const Eigen::Vector2d& q, const GraspFrame& grasp) {
  const double a1 = g.base.theta + q(0);
  const double a12 = a1 + q(1);
  const double l1 = g.link_lengths(0), l2 = g.link_lengths(1);
  const double s1 = std::sin(a1), c1 = std::cos(a1), s12 = std::sin(a12), c12 = std::cos(a12);

  JacobianBundle b;
  b.x = forward_kinematics(g, q);
  b.J << -l1 * s1 - l2 * s12, -l2 * s12,
          l1 * c1 + l2 * c12,  l2 * c12;

  Eigen::Matrix2d dJ_dq1, dJ_dq2;
  dJ_dq1 << -l1 * c1 - l2 * c12, -l2 * c12,
            -l1 * s1 - l2 * s12, -l2 * s12;
  dJ_dq2 << -l2 * c12, -l2 * c12,
            -l2 * s12, -l2 * s12;
  b.dJT_dq = {dJ_dq1.transpose(), dJ_dq2.transpose()};

  if (grasp.mode == GraspMode::fixed) {
    if (std::abs(grasp.direction.norm() - 1.0) > 1e-9)
      throw DomainError("grasp direction must have unit norm");
    b.J_p = grasp.direction.transpose();
    b.dJpT_dx = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  } else {
    const Eigen::Vector2d d = grasp.center - b.x;
    const double rho = d.norm();
    if (!(rho > 1e-12)) throw DomainError("fingertip coincides with the object centre");
    const Eigen::Vector2d u = d / rho;
    b.J_p = u.transpose();
    const Eigen::Matrix2d P = (Eigen::Matrix2d::Identity() - u * u.transpose()) / rho;
    b.dJpT_dx = {Eigen::Vector2d(-P.col(0)), Eigen::Vector2d(-P.col(1))};
  }
  return b;
}

/// Fixed grasp direction overload.
inline JacobianBundle jacobians(const FingerGeometry& g, const Eigen::Vector2d& q, const Eigen::Vector2d& grasp_direction) {
  return jacobians(g, q, GraspFrame::fixed(grasp_direction));
}

/// Joint-space matrix of the force-dependent terms per unit task force:
/// column k is d(J^T)/dq_k J_p^T + J^T sum_m d(J_p^T)/dx_m J(m,k).
inline Eigen::Matrix2d geometric_stiffness_per_force(const JacobianBundle& b) {
  Eigen::Matrix2d G;
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector2d col = b.dJT_dq[k] * b.J_p.transpose();
    Eigen::Vector2d dproj = Eigen::Vector2d::Zero();
    for (int m = 0; m < 2; ++m) dproj += b.dJpT_dx[m] * b.J(m, k);
    col += b.J.transpose() * dproj;
    G.col(k) = col;
  }
  return G;
}

/// Relative singular-value cutoff below which the finger counts as singular.
inline constexpr double kSingularCutoff = 1e-10;

/// Scalar task stiffness K_p = J_p^+T J^+T (K - G F_p) J^+ J_p^+, no sign checks.
inline double task_space_stiffness_value(const Eigen::MatrixXd& K, const JacobianBundle& b, double F_p) {
  if (K.rows() != 2 || K.cols() != 2) throw ShapeError("joint stiffness must be 2x2 for the planar finger");
  if (linalg::singular_value_ratio(b.J) < kSingularCutoff)
    throw SingularityError("finger Jacobian is rank deficient at this configuration");
  const Eigen::MatrixXd J_pinv = linalg::pseudo_inverse(b.J, kSingularCutoff);
  const Eigen::MatrixXd Jp_pinv = linalg::pseudo_inverse(b.J_p, kSingularCutoff);
  const Eigen::MatrixXd map = J_pinv * Jp_pinv;  // 2x1
  const Eigen::MatrixXd K_eff = K - geometric_stiffness_per_force(b) * F_p;
  return (map.transpose() * K_eff * map)(0, 0);
}

/// Task-level stiffness along the grasp coordinate.
inline StiffnessMatrix task_space_stiffness(const StiffnessMatrix& K, const JacobianBundle& b, double F_p) {
  if (K.frame() != Frame::joint) throw DomainError("task_space_stiffness expects a joint-level matrix");
  if (!(linalg::min_eigenvalue(K.matrix()) > 0.0)) throw DomainError("joint stiffness must be positive definite");
  Eigen::MatrixXd Kp(1, 1);
  Kp(0, 0) = task_space_stiffness_value(K.matrix(), b, F_p);
  return StiffnessMatrix(Kp, Frame::task);
}

struct GraspPoint {
  double delta_p = 0.0;  // m
  double F_p = 0.0;      // N
  double K_p = 0.0;      // N/m at the converged force
  int iterations = 0;
};

struct GraspModel {
  FingerGeometry finger;
  GraspFrame grasp;
  StiffnessMatrix K;  // joint-level passive stiffness
};

inline constexpr double kGraspDamping = 0.5;
inline constexpr double kGraspTolerance = 1e-8;
inline constexpr int kGraspMaxIterations = 200;

/// Task force against deviation along the grasp direction: at each grid point the
/// fixed point F = K_p(F) * delta_p is found by damped iteration.
inline std::vector<GraspPoint> grasp_force_curve(const GraspModel& model, const Eigen::Vector2d& q0,
                                                 const std::vector<double>& deviations) {
  if (model.K.frame() != Frame::joint) throw DomainError("grasp model needs a joint-level stiffness");
  if (!(linalg::min_eigenvalue(model.K.matrix()) > 0.0)) throw DomainError("joint stiffness must be positive definite");
  const JacobianBundle b = jacobians(model.finger, q0, model.grasp);
  std::vector<GraspPoint> out;
  out.reserve(deviations.size());
  for (const double dp : deviations) {
    if (!std::isfinite(dp)) throw DomainError("deviation must be finite");
    GraspPoint pt{dp, 0.0, task_space_stiffness_value(model.K.matrix(), b, 0.0), 0};
    if (dp != 0.0) {
      double F = pt.K_p * dp;
      bool converged = false;
      double residual = 0.0;
      for (int it = 1; it <= kGraspMaxIterations; ++it) {
        const double target = task_space_stiffness_value(model.K.matrix(), b, F) * dp;
        const double next = (1.0 - kGraspDamping) * F + kGraspDamping * target;
        residual = std::abs(next - F);
        F = next;
        pt.iterations = it;
        if (!std::isfinite(F)) break;
        if (residual <= kGraspTolerance * std::abs(F)) {
          converged = true;
          break;
        }
      }
      if (!converged)
        throw ConvergenceError("grasp force fixed point at delta_p = " + std::to_string(dp) + " m", residual);
      pt.F_p = F;
      pt.K_p = task_space_stiffness_value(model.K.matrix(), b, F);
    }
    out.push_back(pt);
  }
  return out;
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t samples) {
  if (samples < 2) throw GridError("a grid needs at least 2 samples");
  std::vector<double> g(samples);
  for (std::size_t i = 0; i < samples; ++i)
    g[i] = (i + 1 == samples) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
  return g;
}

}  // namespace dsj
