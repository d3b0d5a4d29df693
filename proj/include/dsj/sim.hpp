#pragma once

// Numerical counterparts of the validation experiments: the nonlinear series
// torque model of a DSJ finger, stiffness-ellipse regression over a circle of
// joint deviations, and step responses of the finger under constant stiffness.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dsj/errors.hpp"
#include "dsj/linalg.hpp"
#include "dsj/model.hpp"
#include "dsj/stiffness.hpp"
#include "dsj/synthesis.hpp"

namespace dsj {

// ---------------------------------------------------------------------------
// Nonlinear DSJ torque model

/// Restoring joint torque of a DSJ finger deflected by dq from equilibrium.
///
/// The position and joint tendons act as one linear series element of stiffness
/// K_max. The spiral path is nonlinear: a joint-level share y of the deflection
/// turns the spiral joints by theta = R_D^-1 R_J y, each spiral tendon stretches by
/// the wrapped length from q_s0 to q_s0 + theta_i, and its tension acts on the
/// moment arm r_i(q_s0 + theta_i). The share y is solved so the same torque passes
/// through both elements.
class DsjTorqueModel {
 public:
  /// Torque balance between the linear and spiral elements, relative to |K_max| |dq|.
  static constexpr double kTorqueTolerance = 1e-12;

  DsjTorqueModel(const PulleyGeometry& pulleys, const SpringConstants& springs, SpiralProfile profile, double q_s0)
      : profile_(std::move(profile)), q_s0_(q_s0), k_s_(springs.k_s) {
    if (!profile_.has_radii()) throw StateError("spiral radii have not been solved");
    if (static_cast<Eigen::Index>(profile_.joints()) != pulleys.dof())
      throw ShapeError("profile joint count does not match the pulleys");
    G_ = pulleys.R_D.inverse() * pulleys.R_J;
    K_lin_ = k_max(pulleys, springs).matrix();
    linearized_ = passive_from_radii(profile_.radii_matrix_at(q_s0_), pulleys, springs).K_passive;
  }

  /// Instantaneous passive stiffness at the equilibrium spiral angle.
  const StiffnessMatrix& linearized() const noexcept { return linearized_; }
  double q_s0() const noexcept { return q_s0_; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& dq) const {
    if (dq.size() != K_lin_.rows()) throw ShapeError("deflection has the wrong dimension");
    const Eigen::Index n = dq.size();
    // Linear guess from the instantaneous spiral stiffness.
    const Eigen::MatrixXd K_S0 = G_.transpose() * spiral_tangent(Eigen::VectorXd::Zero(n)).asDiagonal() * G_;
    Eigen::VectorXd y = (K_lin_ + K_S0).ldlt().solve(K_lin_ * dq);

    const double scale = K_lin_.norm() * dq.norm();
    if (scale == 0.0) return Eigen::VectorXd::Zero(n);
    auto residual_at = [&](const Eigen::VectorXd& yy) -> Eigen::VectorXd {
      return K_lin_ * (dq - yy) - G_.transpose() * spiral_torque(G_ * yy);
    };
    Eigen::VectorXd residual = residual_at(y);
    double res_norm = residual.norm();
    for (int it = 0; it < 200 && std::isfinite(res_norm); ++it) {
      if (res_norm <= kTorqueTolerance * scale) return -(K_lin_ * (dq - y));
      const Eigen::VectorXd theta = G_ * y;
      const Eigen::MatrixXd jac = K_lin_ + G_.transpose() * spiral_tangent(theta).asDiagonal() * G_;
      Eigen::VectorXd trial = y + jac.partialPivLu().solve(residual);
      Eigen::VectorXd trial_res = residual_at(trial);
      if (!(trial_res.norm() < res_norm)) {
        // Newton cycles when the tangent jumps at a profile knot; the secant
        // stiffness of each spiral is continuous there.
        Eigen::VectorXd secant = spiral_tangent(theta);
        for (Eigen::Index i = 0; i < theta.size(); ++i)
          if (theta(i) != 0.0) secant(i) = spiral_torque(theta)(i) / theta(i);
        trial = (K_lin_ + G_.transpose() * secant.asDiagonal() * G_).partialPivLu().solve(K_lin_ * dq);
        trial_res = residual_at(trial);
      }
      y = std::move(trial);
      residual = std::move(trial_res);
      res_norm = residual.norm();
    }
    throw ConvergenceError("series equilibrium of the spiral path", res_norm / scale);
  }

 private:
  Eigen::VectorXd spiral_torque(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd t(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const auto j = static_cast<std::size_t>(i);
      const double q = q_s0_ + theta(i);
      t(i) = k_s_ * profile_.radius_at(j, q) * profile_.wrapped_length(j, q_s0_, theta(i));
    }
    return t;
  }

  Eigen::VectorXd spiral_tangent(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd t(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const auto j = static_cast<std::size_t>(i);
      const double q = q_s0_ + theta(i);
      const double r = profile_.radius_at(j, q);
      t(i) = k_s_ * (profile_.radius_slope_at(j, q) * profile_.wrapped_length(j, q_s0_, theta(i)) + r * r);
    }
    return t;
  }

  SpiralProfile profile_;
  double q_s0_;
  double k_s_;
  Eigen::MatrixXd G_;
  Eigen::MatrixXd K_lin_;
  StiffnessMatrix linearized_;
};

/// Spiral angle at which a linear alpha schedule reaches `alpha`.
inline double q_s_for_alpha(const ScheduleSettings& s, double alpha) {
  const double lo = std::min(s.alpha_min, s.alpha_max), hi = std::max(s.alpha_min, s.alpha_max);
  if (alpha < lo || alpha > hi)
    throw ValidationError("schedule.experiment_alphas",
                          "alpha " + format_double(alpha) + " lies outside the scheduled range");
  if (s.alpha_max == s.alpha_min) return s.q_s_min;
  return s.q_s_min + (alpha - s.alpha_min) / (s.alpha_max - s.alpha_min) * (s.q_s_max - s.q_s_min);
}

// ---------------------------------------------------------------------------
// Stiffness ellipse

struct EllipseResult {
  StiffnessMatrix K_regressed;
  Eigen::Vector2d semi_axes = Eigen::Vector2d::Zero();  // eigenvalues, major first
  double orientation = 0.0;                             // major axis angle in (-pi/2, pi/2]
  double deviation_radius = 0.0;
};

/// Regresses tau = -K dq from torques sampled on a circle of joint deviations
/// around q0, then reads the ellipse off the symmetrized K.
inline EllipseResult stiffness_ellipse(const TorqueModel& torque, const Eigen::Vector2d& q0,
                                       double radius = deg_to_rad(20.0), std::size_t n_samples = 72) {
  if (!(radius > 0.0)) throw DomainError("deviation radius must be positive");
  if (n_samples < 3) throw RegressionError("at least 3 samples are needed on the deviation circle");
  const Eigen::VectorXd tau0 = torque(q0);
  if (tau0.size() != 2) throw ShapeError("ellipse regression expects a 2-joint torque model");
  Eigen::MatrixXd X(n_samples, 2), T(n_samples, 2);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double phi = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_samples);
    const Eigen::Vector2d dq(radius * std::cos(phi), radius * std::sin(phi));
    const Eigen::VectorXd tau = torque(Eigen::VectorXd(q0 + dq));
    if (!tau.allFinite()) throw NumericalError("torque model returned a non-finite value");
    X.row(static_cast<Eigen::Index>(k)) = dq.transpose();
    T.row(static_cast<Eigen::Index>(k)) = (tau - tau0).transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 2) throw RegressionError("deviation samples do not span the joint plane");
  const Eigen::MatrixXd At = qr.solve(T);  // T = X A^T
  const Eigen::MatrixXd K = linalg::symmetrize(-At.transpose());

  EllipseResult res;
  res.K_regressed = StiffnessMatrix(K, Frame::joint);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(Eigen::Matrix2d(res.K_regressed.matrix()));
  res.semi_axes = Eigen::Vector2d(eig.eigenvalues()(1), eig.eigenvalues()(0));
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  double angle = std::atan2(major(1), major(0));
  if (angle > kPi / 2.0) angle -= kPi;
  if (angle <= -kPi / 2.0) angle += kPi;
  res.orientation = angle;
  res.deviation_radius = radius;
  return res;
}

// ---------------------------------------------------------------------------
// Step response

struct TimeSeries {
  double dt = 0.0;
  std::vector<double> t;
  Eigen::MatrixXd q;     // [sample, joint]
  Eigen::MatrixXd qdot;  // [sample, joint]
  Eigen::MatrixXd tau;   // spring torque -K (q - q_cmd), [sample, joint]

  std::size_t size() const noexcept { return t.size(); }
};

/// Relative energy growth per step tolerated before the step is deemed unstable.
inline constexpr double kEnergyTolerance = 1e-9;

/// Integrates M q'' + B q' + K (q - q_cmd) = 0 from rest at q_init with
/// fixed-step classical Runge-Kutta.
inline TimeSeries simulate_step_response(const StiffnessMatrix& K, const DynamicsParams& dyn,
                                         const Eigen::VectorXd& q_cmd, double horizon, double dt,
                                         const Eigen::VectorXd& q_init = Eigen::VectorXd()) {
  const Eigen::Index n = K.size();
  if (dyn.inertia.rows() != n || q_cmd.size() != n) throw ShapeError("stiffness, dynamics and command sizes differ");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(horizon >= 100.0 * dt)) throw DomainError("horizon must cover at least 100 steps");
  if (!(linalg::min_eigenvalue(K.matrix()) > 0.0)) throw DomainError("passive stiffness must be positive definite");
  const Eigen::VectorXd q_start = q_init.size() == 0 ? Eigen::VectorXd::Zero(n) : q_init;
  if (q_start.size() != n) throw ShapeError("initial configuration has the wrong size");

  const Eigen::MatrixXd& M = dyn.inertia;
  const Eigen::MatrixXd& B = dyn.damping;
  const Eigen::MatrixXd& Km = K.matrix();
  const Eigen::LLT<Eigen::MatrixXd> M_llt(M);

  auto accel = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return M_llt.solve(-B * v - Km * (q - q_cmd));
  };
  auto energy = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
    const Eigen::VectorXd e = q - q_cmd;
    return 0.5 * v.dot(M * v) + 0.5 * e.dot(Km * e);
  };

  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  TimeSeries ts;
  ts.dt = dt;
  ts.t.resize(steps + 1);
  ts.q.resize(static_cast<Eigen::Index>(steps + 1), n);
  ts.qdot.resize(static_cast<Eigen::Index>(steps + 1), n);
  ts.tau.resize(static_cast<Eigen::Index>(steps + 1), n);

  Eigen::VectorXd q = q_start;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  const double e0 = energy(q, v);
  double e_prev = e0;
  for (std::size_t k = 0;; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    ts.t[k] = static_cast<double>(k) * dt;
    ts.q.row(row) = q.transpose();
    ts.qdot.row(row) = v.transpose();
    ts.tau.row(row) = (-(Km * (q - q_cmd))).transpose();
    if (k == steps) break;

    const Eigen::VectorXd a1 = accel(q, v);
    const Eigen::VectorXd q2 = q + 0.5 * dt * v, v2 = v + 0.5 * dt * a1;
    const Eigen::VectorXd a2 = accel(q2, v2);
    const Eigen::VectorXd q3 = q + 0.5 * dt * v2, v3 = v + 0.5 * dt * a2;
    const Eigen::VectorXd a3 = accel(q3, v3);
    const Eigen::VectorXd q4 = q + dt * v3, v4 = v + dt * a3;
    const Eigen::VectorXd a4 = accel(q4, v4);
    q += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);

    const double e = energy(q, v);
    if (!std::isfinite(e) || e > e_prev + kEnergyTolerance * e0)
      throw StepSizeError("energy grew at t = " + format_double(static_cast<double>(k + 1) * dt) + " s with dt = " +
                          format_double(dt) + " s");
    e_prev = e;
  }
  return ts;
}

struct JointResponse {
  double overshoot = 0.0;           // fraction of the step size
  double settling_time = 0.0;       // s, +/-2 % band
  double dominant_frequency = 0.0;  // Hz
  bool settled = true;
};

struct ResponseMetrics {
  double overshoot = 0.0;
  double settling_time = 0.0;
  double dominant_frequency = 0.0;
  bool settled = true;
  std::vector<JointResponse> per_joint;
};

inline constexpr double kSettlingBand = 0.02;

namespace detail {

/// Frequency from sign changes of e(t): (crossings - 1) half periods between the first and last crossing.
inline double zero_crossing_frequency(const std::vector<double>& t, const Eigen::VectorXd& e) {
  std::vector<double> crossings;
  for (Eigen::Index k = 1; k < e.size(); ++k) {
    const double a = e(k - 1), b = e(k);
    if ((a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0)) {
      if (a == 0.0 && b == 0.0) continue;
      const double frac = a / (a - b);
      const auto i = static_cast<std::size_t>(k);
      crossings.push_back(t[i - 1] + frac * (t[i] - t[i - 1]));
    }
  }
  if (crossings.size() < 2) return 0.0;
  const double span = crossings.back() - crossings.front();
  return span > 0.0 ? static_cast<double>(crossings.size() - 1) / (2.0 * span) : 0.0;
}

}  // namespace detail

/// Per-joint overshoot, settling time and dominant frequency of a step response.
/// The aggregate takes the worst overshoot and settling time over joints and the
/// frequency of the joint with the largest commanded step.
inline ResponseMetrics response_metrics(const TimeSeries& series, const Eigen::VectorXd& q_cmd) {
  if (series.size() == 0) throw DomainError("empty time series");
  const Eigen::Index n = series.q.cols();
  if (q_cmd.size() != n) throw ShapeError("command size does not match the series");
  const Eigen::VectorXd step = q_cmd - series.q.row(0).transpose();
  const double largest = step.cwiseAbs().maxCoeff();
  const std::size_t last = series.size() - 1;

  ResponseMetrics out;
  Eigen::Index lead = 0;
  step.cwiseAbs().maxCoeff(&lead);
  for (Eigen::Index j = 0; j < n; ++j) {
    JointResponse jr;
    const Eigen::VectorXd e = series.q.col(j).array() - q_cmd(j);
    const double s = std::abs(step(j));
    const double band = kSettlingBand * (s > 0.0 ? s : largest);
    if (s > 0.0) {
      const double dir = step(j) > 0.0 ? 1.0 : -1.0;
      jr.overshoot = std::max(0.0, (dir * e).maxCoeff()) / s;
    }
    std::ptrdiff_t outside = -1;
    for (std::size_t k = series.size(); k-- > 0;) {
      if (std::abs(e(static_cast<Eigen::Index>(k))) > band) {
        outside = static_cast<std::ptrdiff_t>(k);
        break;
      }
    }
    if (outside < 0) {
      jr.settling_time = 0.0;
    } else if (static_cast<std::size_t>(outside) == last) {
      jr.settled = false;
      jr.settling_time = series.t[last];
    } else {
      jr.settling_time = series.t[static_cast<std::size_t>(outside) + 1];
    }
    jr.dominant_frequency = detail::zero_crossing_frequency(series.t, e);
    out.per_joint.push_back(jr);
    out.overshoot = std::max(out.overshoot, jr.overshoot);
    out.settling_time = std::max(out.settling_time, jr.settling_time);
    out.settled = out.settled && jr.settled;
  }
  out.dominant_frequency = out.per_joint[static_cast<std::size_t>(lead)].dominant_frequency;
  return out;
}

}  // namespace dsj
