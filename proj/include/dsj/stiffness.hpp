#pragma once

// Joint-level stiffness algebra of the differential spiral joint: tendon torque,
// per-path stiffness, series composition, the feasibility window below K_max and
// the spiral-path stiffness a desired passive stiffness requires.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>

#include "dsj/errors.hpp"
#include "dsj/linalg.hpp"
#include "dsj/model.hpp"

namespace dsj {

struct SeriesStiffnessBreakdown {
  StiffnessMatrix K_P_j;  // position path, joint level
  StiffnessMatrix K_S_j;  // spiral path, joint level
  StiffnessMatrix K_J_j;  // joint tendons
  StiffnessMatrix K_passive;
  StiffnessMatrix K_max;  // limit of K_passive as the spiral path becomes rigid
};

/// Net joint torque R_J^T K_t,J (L_J - L_m) produced by the joint tendons.
inline Eigen::VectorXd tendon_torque(const PulleyGeometry& pulleys, const SpringConstants& springs,
                                     const TendonState& tendons) {
  if (tendons.L_J.size() != pulleys.R_J.rows() || tendons.L_m.size() != pulleys.R_J.rows())
    throw ShapeError("tendon state has " + std::to_string(tendons.L_J.size()) + " entries, R_J has " +
                     std::to_string(pulleys.R_J.rows()) + " rows");
  return pulleys.R_J.transpose() * (springs.k_j * (tendons.L_J - tendons.L_m));
}

using TorqueModel = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Stiffness K = -d(tau)/dq of an arbitrary restoring-torque model by central
/// differences with step h, symmetrized. Captures both the moment-arm variation
/// and the tendon-stretch term whenever the model varies its radii with q.
inline StiffnessMatrix joint_stiffness_general(const TorqueModel& torque, const JointState& q0, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  const Eigen::Index n = q0.q.size();
  if (n == 0) throw ShapeError("empty joint state");
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd plus = q0.q, minus = q0.q;
    plus(j) += h;
    minus(j) -= h;
    const Eigen::VectorXd tp = torque(plus);
    const Eigen::VectorXd tm = torque(minus);
    if (tp.size() != n || tm.size() != n) throw ShapeError("torque model returned the wrong dimension");
    if (!tp.allFinite() || !tm.allFinite()) throw NumericalError("torque model returned a non-finite value");
    K.col(j) = -(tp - tm) / (2.0 * h);
  }
  return StiffnessMatrix(linalg::symmetrize(K), Frame::joint);
}

// ---------------------------------------------------------------------------
// Per-path stiffness

/// Joint tendons: K_J,j = R_J^T k_j R_J.
inline StiffnessMatrix joint_path_stiffness(const PulleyGeometry& pulleys, const SpringConstants& springs) {
  return StiffnessMatrix(springs.k_j * pulleys.R_J.transpose() * pulleys.R_J, Frame::joint);
}

/// Position tendons at the differential level. The position path mirrors the
/// spiral path, K_P,j = (R_P R_D^-1 R_J)^T k_p (R_P R_D^-1 R_J), and K_P,d = K_P,j / n^2.
inline StiffnessMatrix position_path_stiffness(const PulleyGeometry& pulleys, const SpringConstants& springs) {
  const Eigen::MatrixXd T = pulleys.R_P * pulleys.R_D.inverse() * pulleys.R_J;
  return StiffnessMatrix(springs.k_p * T.transpose() * T / (pulleys.n * pulleys.n), Frame::differential);
}

/// Instantaneous spiral-path stiffness (R_S R_D^-1 R_J)^T k_s (R_S R_D^-1 R_J) for diagonal spiral radii R_S.
inline StiffnessMatrix spiral_stiffness_from_radii(const Eigen::MatrixXd& R_S, const PulleyGeometry& pulleys,
                                                   const SpringConstants& springs) {
  if (R_S.rows() != pulleys.dof() || R_S.cols() != pulleys.dof())
    throw ShapeError("R_S must be " + std::to_string(pulleys.dof()) + "x" + std::to_string(pulleys.dof()));
  if (!linalg::is_diagonal(R_S)) throw DomainError("R_S must be diagonal");
  if ((R_S.diagonal().array() < 0.0).any()) throw DomainError("spiral radii must be non-negative");
  if (linalg::singular_value_ratio(pulleys.R_D) < 1e-14) throw SingularityError("R_D");
  const Eigen::MatrixXd T = R_S * pulleys.R_D.inverse() * pulleys.R_J;
  return StiffnessMatrix(springs.k_s * T.transpose() * T, Frame::joint);
}

/// Closed form of the spiral-path stiffness for the coupled two-joint finger.
inline StiffnessMatrix coupled_stiffness_2dof(double r_s1, double r_s2, double n, double k_s) {
  if (r_s1 < 0.0 || r_s2 < 0.0) throw DomainError("spiral radii must be non-negative");
  const double c = n * n * k_s;
  Eigen::MatrixXd K(2, 2);
  K << c * (r_s1 * r_s1 + r_s2 * r_s2), c * r_s2 * r_s2,
       c * r_s2 * r_s2,                 c * r_s2 * r_s2;
  return StiffnessMatrix(K, Frame::joint);
}

inline StiffnessMatrix to_differential(const StiffnessMatrix& joint_level, double n) {
  return StiffnessMatrix(joint_level.matrix() / (n * n), Frame::differential);
}

inline StiffnessMatrix to_joint(const StiffnessMatrix& differential_level, double n) {
  return StiffnessMatrix(differential_level.matrix() * (n * n), Frame::joint);
}

// ---------------------------------------------------------------------------
// Series composition

namespace detail {

inline void expect_frame(const StiffnessMatrix& K, Frame f, const char* name) {
  if (K.frame() != f)
    throw DomainError(std::string(name) + " must be " + to_string(f) + "-level, got " + to_string(K.frame()));
}

}  // namespace detail

/// K_passive^-1 = n^-2 K_P,d^-1 + n^-2 K_S,d^-1 + K_J,j^-1.
inline SeriesStiffnessBreakdown compose_passive(const StiffnessMatrix& K_P_d, const StiffnessMatrix& K_S_d,
                                                const StiffnessMatrix& K_J_j, double n) {
  detail::expect_frame(K_P_d, Frame::differential, "K_P_d");
  detail::expect_frame(K_S_d, Frame::differential, "K_S_d");
  detail::expect_frame(K_J_j, Frame::joint, "K_J_j");
  if (K_P_d.size() != K_J_j.size() || K_S_d.size() != K_J_j.size())
    throw ShapeError("path stiffness matrices differ in size");
  if (!(n > 0.0)) throw DomainError("amplification ratio must be positive");

  const double inv_n2 = 1.0 / (n * n);
  const Eigen::MatrixXd C_P = inv_n2 * linalg::spd_inverse(K_P_d.matrix(), "position path (P)");
  const Eigen::MatrixXd C_S = inv_n2 * linalg::spd_inverse(K_S_d.matrix(), "spiral path (S)");
  const Eigen::MatrixXd C_J = linalg::spd_inverse(K_J_j.matrix(), "joint path (J)");

  SeriesStiffnessBreakdown out{
      to_joint(K_P_d, n),
      to_joint(K_S_d, n),
      K_J_j,
      StiffnessMatrix(linalg::spd_inverse(C_P + C_S + C_J, "passive compliance"), Frame::joint),
      StiffnessMatrix(linalg::spd_inverse(C_P + C_J, "position+joint compliance"), Frame::joint),
  };
  return out;
}

/// Upper limit of the achievable passive stiffness, (n^-2 K_P,d^-1 + K_J,j^-1)^-1.
inline StiffnessMatrix k_max(const PulleyGeometry& pulleys, const SpringConstants& springs) {
  const double inv_n2 = 1.0 / (pulleys.n * pulleys.n);
  const Eigen::MatrixXd C_P =
      inv_n2 * linalg::spd_inverse(position_path_stiffness(pulleys, springs).matrix(), "position path (P)");
  const Eigen::MatrixXd C_J = linalg::spd_inverse(joint_path_stiffness(pulleys, springs).matrix(), "joint path (J)");
  return StiffnessMatrix(linalg::spd_inverse(C_P + C_J, "position+joint compliance"), Frame::joint);
}

/// Passive stiffness realized by a set of spiral radii.
inline SeriesStiffnessBreakdown passive_from_radii(const Eigen::MatrixXd& R_S, const PulleyGeometry& pulleys,
                                                   const SpringConstants& springs) {
  return compose_passive(position_path_stiffness(pulleys, springs),
                         to_differential(spiral_stiffness_from_radii(R_S, pulleys, springs), pulleys.n),
                         joint_path_stiffness(pulleys, springs), pulleys.n);
}

/// Relative margin below K_max (and above zero) that a target must keep.
inline constexpr double kFeasibilityMargin = 1e-9;

/// Throws InfeasibleTargetError unless 0 < K_desired < K_max strictly in the PSD order.
inline void check_feasible(const Eigen::MatrixXd& K_desired, const Eigen::MatrixXd& K_max_m) {
  const double margin = kFeasibilityMargin * K_max_m.trace();
  const double lo = linalg::min_eigenvalue(K_desired);
  if (!(lo > margin))
    throw InfeasibleTargetError("target is not positive definite (min eigenvalue " + std::to_string(lo) + ")", lo);
  const double gap = linalg::min_eigenvalue(K_max_m - K_desired);
  if (!(gap > margin))
    throw InfeasibleTargetError("target reaches or exceeds K_max (min eigenvalue of K_max - K_desired " +
                                    std::to_string(gap) + ")",
                                gap);
}

/// Joint-level spiral stiffness K_S,j = (K_desired^-1 - n^-2 K_P,d^-1 - K_J,j^-1)^-1.
/// K_S,j may be singular (a zero spiral radius); the inputs may not.
inline StiffnessMatrix required_spiral_stiffness(const StiffnessMatrix& K_desired, const PulleyGeometry& pulleys,
                                                 const SpringConstants& springs) {
  detail::expect_frame(K_desired, Frame::joint, "K_desired");
  if (K_desired.size() != pulleys.dof()) throw ShapeError("target size does not match the joint count");
  const Eigen::MatrixXd Kmax = k_max(pulleys, springs).matrix();
  check_feasible(K_desired.matrix(), Kmax);
  // Same as (K_desired^-1 - K_max^-1)^-1, but only the feasibility gap is factored,
  // so a spiral path that is rigid in some direction still has a finite answer.
  const Eigen::MatrixXd K_S = Kmax * (Kmax - K_desired.matrix()).ldlt().solve(K_desired.matrix());
  return StiffnessMatrix(linalg::symmetrize(K_S), Frame::joint);
}

}  // namespace dsj
