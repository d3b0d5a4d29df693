#pragma once

// Domain types shared by every module, unit conventions, and validation of the
// raw configuration tree into an immutable SI bundle.
//
// Config files use millimetres and degrees; everything past validate_config()
// is SI (m, rad, N/m, N*m/rad, kg*m^2).

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dsj/errors.hpp"
#include "dsj/linalg.hpp"

namespace dsj {

inline constexpr double kPi = std::numbers::pi;

constexpr double mm_to_m(double mm) { return mm * 1e-3; }
constexpr double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
constexpr double m_to_mm(double m) { return m * 1e3; }
constexpr double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

// ---------------------------------------------------------------------------
// Springs and pulleys

/// Effective linear stiffness (N/m) of each antagonistic tendon pair.
struct SpringConstants {
  double k_p = 0.0;  // position-related tendons
  double k_s = 0.0;  // stiffness-related (spiral) tendons
  double k_j = 0.0;  // joint-related tendons

  static SpringConstants make(double k_p, double k_s, double k_j) {
    auto check = [](const char* name, double k) {
      if (!std::isfinite(k) || k <= 0.0)
        throw ValidationError(std::string("springs.") + name, "must be strictly positive and finite");
    };
    check("k_p", k_p);
    check("k_s", k_s);
    check("k_j", k_j);
    return SpringConstants{k_p, k_s, k_j};
  }

  SpringConstants scaled(double factor) const { return {k_p * factor, k_s * factor, k_j * factor}; }
};

/// Radius matrices of the transmission (m) and the amplification ratio n.
struct PulleyGeometry {
  Eigen::MatrixXd R_J;  // joint pulley coupling, lower-triangular for coupled fingers
  Eigen::MatrixXd R_D;  // differential housing, diagonal
  Eigen::MatrixXd R_P;  // position pulley, diagonal
  double n = 1.0;

  Eigen::Index dof() const { return R_J.rows(); }

  /// Validates shapes and signs. When `n` is empty it is derived as the uniform
  /// ratio diag(R_D)/diag(R_J); a non-uniform ratio must be supplied explicitly.
  static PulleyGeometry make(Eigen::MatrixXd R_J, Eigen::MatrixXd R_D, Eigen::MatrixXd R_P,
                             std::optional<double> n = std::nullopt) {
    if (!linalg::is_square(R_J)) throw ShapeError("pulleys.R_J must be a non-empty square matrix");
    if (!linalg::is_square(R_D)) throw ShapeError("pulleys.R_D must be a non-empty square matrix");
    if (!linalg::is_square(R_P)) throw ShapeError("pulleys.R_P must be a non-empty square matrix");
    if (R_D.rows() != R_J.rows() || R_P.rows() != R_J.rows())
      throw ShapeError("pulleys.R_J, R_D and R_P must have the same dimension");
    if (!R_J.allFinite() || !R_D.allFinite() || !R_P.allFinite())
      throw ValidationError("pulleys", "radii must be finite");
    for (Eigen::Index i = 0; i < R_J.rows(); ++i) {
      if (R_J(i, i) <= 0.0) throw ValidationError("pulleys.R_J", "diagonal radii must be positive");
      if (R_D(i, i) <= 0.0) throw ValidationError("pulleys.R_D", "diagonal radii must be positive");
      if (R_P(i, i) <= 0.0) throw ValidationError("pulleys.R_P", "diagonal radii must be positive");
    }
    if (!linalg::is_diagonal(R_D)) throw ValidationError("pulleys.R_D", "must be diagonal");
    if (!linalg::is_diagonal(R_P)) throw ValidationError("pulleys.R_P", "must be diagonal");

    double ratio = 0.0;
    if (n) {
      ratio = *n;
    } else {
      ratio = R_D(0, 0) / R_J(0, 0);
      for (Eigen::Index i = 1; i < R_J.rows(); ++i) {
        const double r = R_D(i, i) / R_J(i, i);
        if (std::abs(r - ratio) > 1e-12 * std::abs(ratio))
          throw ValidationError("pulleys.n", "radius ratios differ per joint; n must be supplied explicitly");
      }
    }
    if (!std::isfinite(ratio) || ratio <= 0.0) throw ValidationError("pulleys.n", "must be strictly positive");
    return PulleyGeometry{std::move(R_J), std::move(R_D), std::move(R_P), ratio};
  }

  /// The coupled two-joint finger: R_J = r_j [[1,0],[1,1]], R_D = r_d I, R_P = r_p I.
  static PulleyGeometry coupled_2dof(double r_j, double r_d, double r_p, std::optional<double> n = std::nullopt) {
    Eigen::MatrixXd RJ(2, 2);
    RJ << r_j, 0.0, r_j, r_j;
    return make(RJ, r_d * Eigen::MatrixXd::Identity(2, 2), r_p * Eigen::MatrixXd::Identity(2, 2), n);
  }
};

// ---------------------------------------------------------------------------
// Stiffness matrices

enum class Frame { joint, differential, task };

inline const char* to_string(Frame f) {
  switch (f) {
    case Frame::joint: return "joint";
    case Frame::differential: return "differential";
    case Frame::task: return "task";
  }
  return "?";
}

/// Symmetric positive-semidefinite stiffness, tagged with the level it lives at.
/// Stored exactly symmetric.
class StiffnessMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-9;
  static constexpr double kPsdTol = 1e-12;

  StiffnessMatrix() = default;

  StiffnessMatrix(const Eigen::MatrixXd& entries, Frame frame) : frame_(frame) {
    if (!linalg::is_square(entries)) throw ShapeError("stiffness matrix must be square and non-empty");
    if (!entries.allFinite()) throw NumericalError("stiffness matrix has non-finite entries");
    if (!linalg::is_symmetric(entries, kSymmetryTol)) throw NumericalError("stiffness matrix is not symmetric");
    entries_ = linalg::symmetrize(entries);
    const double trace = std::abs(entries_.trace());
    const double lo = linalg::min_eigenvalue(entries_);
    if (lo < -kPsdTol * trace)
      throw NumericalError("stiffness matrix is not positive semidefinite (eigenvalue " + std::to_string(lo) + ")");
  }

  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  Frame frame() const noexcept { return frame_; }
  Eigen::Index size() const noexcept { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

 private:
  Eigen::MatrixXd entries_;
  Frame frame_ = Frame::joint;
};

// ---------------------------------------------------------------------------
// States

struct TendonState {
  Eigen::VectorXd L_J;  // length change from joint rotation (m)
  Eigen::VectorXd L_m;  // length change from motor rotation (m)

  static TendonState make(Eigen::VectorXd L_J, Eigen::VectorXd L_m) {
    if (L_J.size() != L_m.size()) throw ShapeError("tendon length vectors differ in size");
    if (!L_J.allFinite() || !L_m.allFinite()) throw NumericalError("tendon lengths must be finite");
    return TendonState{std::move(L_J), std::move(L_m)};
  }
};

struct JointState {
  Eigen::VectorXd q;     // rad
  Eigen::VectorXd qdot;  // rad/s

  static JointState at_rest(Eigen::VectorXd q) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(q.size());
    return JointState{std::move(q), std::move(v)};
  }
  static JointState make(Eigen::VectorXd q, Eigen::VectorXd qdot) {
    if (q.size() != qdot.size()) throw ShapeError("q and qdot differ in size");
    return JointState{std::move(q), std::move(qdot)};
  }
};

struct BasePose {
  double x = 0.0;  // m
  double y = 0.0;  // m
  double theta = 0.0;  // rad
};

struct FingerGeometry {
  Eigen::Vector2d link_lengths = Eigen::Vector2d::Zero();
  BasePose base;

  static FingerGeometry make(double l1, double l2, BasePose base = {}) {
    if (!(l1 > 0.0) || !(l2 > 0.0) || !std::isfinite(l1) || !std::isfinite(l2))
      throw ValidationError("finger.link_lengths", "link lengths must be strictly positive");
    return FingerGeometry{Eigen::Vector2d(l1, l2), base};
  }
};

struct DynamicsParams {
  Eigen::MatrixXd inertia;  // kg*m^2
  Eigen::MatrixXd damping;  // N*m*s/rad

  static DynamicsParams make(Eigen::MatrixXd inertia, Eigen::MatrixXd damping) {
    if (!linalg::is_square(inertia)) throw ShapeError("dynamics.inertia must be square");
    if (!linalg::is_square(damping)) throw ShapeError("dynamics.damping must be square");
    if (inertia.rows() != damping.rows()) throw ShapeError("dynamics.inertia and damping differ in size");
    if (!linalg::is_symmetric(inertia, 1e-9)) throw ValidationError("dynamics.inertia", "must be symmetric");
    if (!linalg::is_symmetric(damping, 1e-9)) throw ValidationError("dynamics.damping", "must be symmetric");
    if (!(linalg::min_eigenvalue(inertia) > 0.0))
      throw ValidationError("dynamics.inertia", "must be positive definite");
    if (linalg::min_eigenvalue(damping) < -1e-12 * std::abs(damping.trace()))
      throw ValidationError("dynamics.damping", "must be positive semidefinite");
    return DynamicsParams{linalg::symmetrize(inertia), linalg::symmetrize(damping)};
  }
};

struct TaskState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();  // fingertip position (m)
  double delta_p = 0.0;                         // deviation along the grasp direction (m)
  double F_p = 0.0;                             // task force (N)
};

// ---------------------------------------------------------------------------
// Stiffness schedule

/// Desired passive stiffness as a function of the shared spiral angle q_s.
/// A sample holds either a fraction alpha of K_max or an explicit joint-level matrix.
class StiffnessSchedule {
 public:
  using Target = std::variant<double, StiffnessMatrix>;
  struct Sample {
    double q_s = 0.0;
    Target target;
  };

  StiffnessSchedule() = default;

  explicit StiffnessSchedule(std::vector<Sample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i].q_s)) throw ValidationError("schedule", "q_s must be finite");
      if (i > 0 && !(samples_[i].q_s > samples_[i - 1].q_s))
        throw ValidationError("schedule", "q_s samples must be strictly increasing");
      if (const double* alpha = std::get_if<double>(&samples_[i].target)) {
        if (!(*alpha > 0.0 && *alpha < 1.0))
          throw InfeasibleTargetError("alpha = " + std::to_string(*alpha) + " at q_s = " +
                                          std::to_string(samples_[i].q_s) + " lies outside (0, 1)",
                                      *alpha);
      }
    }
  }

  /// alpha varying linearly from alpha_lo at q_lo to alpha_hi at q_hi on a uniform grid.
  static StiffnessSchedule linear_alpha(double q_lo, double q_hi, double alpha_lo, double alpha_hi,
                                        std::size_t samples) {
    if (samples < 2) throw GridError("a schedule needs at least 2 samples");
    if (!(q_hi > q_lo)) throw ValidationError("schedule", "q_s range must be increasing");
    std::vector<Sample> out;
    out.reserve(samples);
    const double last = static_cast<double>(samples - 1);
    for (std::size_t i = 0; i < samples; ++i) {
      const double u = static_cast<double>(i) / last;
      const double q = (i + 1 == samples) ? q_hi : q_lo + u * (q_hi - q_lo);
      const double a = (i + 1 == samples) ? alpha_hi : alpha_lo + u * (alpha_hi - alpha_lo);
      out.push_back({q, a});
    }
    return StiffnessSchedule(std::move(out));
  }

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }

 private:
  std::vector<Sample> samples_;
};

// ---------------------------------------------------------------------------
// Validated configuration bundle

enum class GraspMode { fixed, object_normal };

struct ScheduleSettings {
  double q_s_min = 0.0;  // rad
  double q_s_max = 4.0 * kPi;
  double alpha_min = 0.2;
  double alpha_max = 0.8;
  std::size_t samples = 361;
  double z_min = 0.0;  // m
  double z_max = 0.012;
  double assumption_threshold = 0.05;
  std::vector<double> experiment_alphas{0.2, 0.5, 0.8};
  double ellipse_radius = deg_to_rad(20.0);
  std::size_t ellipse_samples = 72;
  std::optional<StiffnessSchedule> explicit_targets;

  StiffnessSchedule schedule() const {
    if (explicit_targets) return *explicit_targets;
    return StiffnessSchedule::linear_alpha(q_s_min, q_s_max, alpha_min, alpha_max, samples);
  }
};

struct GraspSettings {
  Eigen::Vector2d q0 = Eigen::Vector2d(deg_to_rad(30.0), deg_to_rad(45.0));
  GraspMode mode = GraspMode::fixed;
  Eigen::Vector2d direction = Eigen::Vector2d(1.0, 0.0);
  Eigen::Vector2d object_center = Eigen::Vector2d(0.1, 0.0);  // m, object_normal mode only
  double deviation_max = 0.01;  // m
  std::size_t deviation_samples = 21;
};

struct StepSettings {
  Eigen::VectorXd q_cmd = Eigen::Vector2d(deg_to_rad(10.0), deg_to_rad(10.0));
  double horizon = 4.0;  // s
  double dt = 1e-4;      // s
};

struct ModelBundle {
  SpringConstants springs;
  PulleyGeometry pulleys;
  FingerGeometry finger;
  DynamicsParams dynamics;
  ScheduleSettings schedule;
  GraspSettings grasp;
  StepSettings step;
};

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& obj, const std::string& section, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(section + "." + key, "missing");
  return *it;
}

inline double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ValidationError(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(field, "must be finite");
  return d;
}

inline double positive(const json& v, const std::string& field) {
  const double d = number(v, field);
  if (!(d > 0.0)) throw ValidationError(field, "must be strictly positive");
  return d;
}

inline std::size_t count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(field, "expected a non-negative integer");
  return static_cast<std::size_t>(v.get<long long>());
}

inline std::vector<double> vector(const json& v, const std::string& field) {
  if (!v.is_array()) throw ValidationError(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline Eigen::MatrixXd matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ShapeError(field + " must be a non-empty array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array()) throw ShapeError(field + " must be an array of rows");
    if (i == 0) cols = v[i].size();
    if (v[i].size() != cols) throw ShapeError(field + " has ragged rows");
  }
  if (rows != cols) throw ShapeError(field + " must be square, got " + std::to_string(rows) + "x" + std::to_string(cols));
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(i, j) = number(v[i][j], field + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  return m;
}

/// A scalar (uniform diagonal) or a list (diagonal entries) of radii in mm, as a diagonal matrix in m.
inline Eigen::MatrixXd diagonal_radii_mm(const json& v, const std::string& field, Eigen::Index dof) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dof, dof);
  if (v.is_number()) {
    const double r = positive(v, field);
    for (Eigen::Index i = 0; i < dof; ++i) m(i, i) = mm_to_m(r);
    return m;
  }
  const auto list = vector(v, field);
  if (static_cast<Eigen::Index>(list.size()) != dof)
    throw ShapeError(field + " must list " + std::to_string(dof) + " radii");
  for (Eigen::Index i = 0; i < dof; ++i) {
    if (!(list[i] > 0.0)) throw ValidationError(field, "radii must be strictly positive");
    m(i, i) = mm_to_m(list[i]);
  }
  return m;
}

inline Eigen::Vector2d vec2(const json& v, const std::string& field) {
  const auto list = vector(v, field);
  if (list.size() != 2) throw ShapeError(field + " must have 2 entries");
  return {list[0], list[1]};
}

}  // namespace detail

/// Allowed keys per config section; anything else is rejected as a likely typo.
inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"", {"springs", "pulleys", "finger", "dynamics", "schedule"}},
      {"springs", {"k_p", "k_s", "k_j"}},
      {"pulleys", {"r_j_mm", "R_J_mm", "r_d_mm", "r_p_mm", "n", "coupling"}},
      {"finger",
       {"link_lengths_mm", "base_pose", "q0_deg", "grasp_mode", "grasp_direction", "object_center_mm",
        "deviation_max_mm", "deviation_samples"}},
      {"finger.base_pose", {"x_mm", "y_mm", "theta_deg"}},
      {"dynamics", {"inertia", "damping", "step_deg", "horizon_s", "dt_s"}},
      {"schedule",
       {"q_s_min_deg", "q_s_max_deg", "alpha_min", "alpha_max", "samples", "z_min_mm", "z_max_mm",
        "assumption_threshold", "experiment_alphas", "ellipse_radius_deg", "ellipse_samples", "targets"}},
      {"schedule.targets[]", {"q_s_deg", "K"}},
  };
  return schema;
}

/// Every key path in `raw` that the schema does not know about.
inline std::vector<std::string> unknown_config_keys(const nlohmann::json& raw) {
  std::vector<std::string> offenders;
  const auto& schema = config_schema();
  auto visit = [&](const nlohmann::json& obj, const std::string& section, const std::string& shown) {
    if (!obj.is_object()) return;
    const auto& allowed = schema.at(section);
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) offenders.push_back(shown.empty() ? it.key() : shown + "." + it.key());
  };
  visit(raw, "", "");
  if (!raw.is_object()) return offenders;
  for (const char* section : {"springs", "pulleys", "finger", "dynamics", "schedule"})
    if (raw.contains(section)) visit(raw[section], section, section);
  if (raw.contains("finger") && raw["finger"].is_object() && raw["finger"].contains("base_pose"))
    visit(raw["finger"]["base_pose"], "finger.base_pose", "finger.base_pose");
  if (raw.contains("schedule") && raw["schedule"].is_object() && raw["schedule"].contains("targets") &&
      raw["schedule"]["targets"].is_array()) {
    const auto& targets = raw["schedule"]["targets"];
    for (std::size_t i = 0; i < targets.size(); ++i)
      visit(targets[i], "schedule.targets[]", "schedule.targets[" + std::to_string(i) + "]");
  }
  return offenders;
}

/// Turns a parsed configuration tree into a validated SI bundle.
/// Missing optional keys fall back to the defaults of the settings structs.
inline ModelBundle validate_config(const nlohmann::json& raw) {
  using namespace detail;
  if (!raw.is_object()) throw ValidationError("config", "top level must be an object");
  for (const char* section : {"springs", "pulleys", "finger", "dynamics"})
    if (!raw.contains(section) || !raw[section].is_object())
      throw ValidationError(section, "missing section");

  ModelBundle b{};

  // springs
  {
    const auto& s = raw["springs"];
    auto k = [&](const char* key) { return number(require(s, "springs", key), std::string("springs.") + key); };
    b.springs = SpringConstants::make(k("k_p"), k("k_s"), k("k_j"));
  }

  // pulleys
  {
    const auto& p = raw["pulleys"];
    Eigen::MatrixXd RJ;
    if (p.contains("R_J_mm")) {
      if (p.contains("r_j_mm")) throw ValidationError("pulleys", "give either r_j_mm or R_J_mm, not both");
      RJ = matrix(p["R_J_mm"], "pulleys.R_J_mm") * 1e-3;
    } else {
      const double rj = mm_to_m(positive(require(p, "pulleys", "r_j_mm"), "pulleys.r_j_mm"));
      const std::string coupling = p.value("coupling", std::string("coupled"));
      RJ = Eigen::MatrixXd::Zero(2, 2);
      if (coupling == "coupled") {
        RJ << rj, 0.0, rj, rj;
      } else if (coupling == "independent") {
        RJ << rj, 0.0, 0.0, rj;
      } else {
        throw ValidationError("pulleys.coupling", "expected \"coupled\" or \"independent\"");
      }
    }
    const Eigen::Index dof = RJ.rows();
    Eigen::MatrixXd RD = diagonal_radii_mm(require(p, "pulleys", "r_d_mm"), "pulleys.r_d_mm", dof);
    Eigen::MatrixXd RP = p.contains("r_p_mm") ? diagonal_radii_mm(p["r_p_mm"], "pulleys.r_p_mm", dof) : RD;
    std::optional<double> n;
    if (p.contains("n")) n = positive(p["n"], "pulleys.n");
    b.pulleys = PulleyGeometry::make(RJ, RD, RP, n);
  }

  // finger
  {
    const auto& f = raw["finger"];
    const auto links = vector(require(f, "finger", "link_lengths_mm"), "finger.link_lengths_mm");
    if (links.size() != 2) throw ShapeError("finger.link_lengths_mm must have 2 entries (planar 2-link finger)");
    BasePose base;
    if (f.contains("base_pose")) {
      const auto& bp = f["base_pose"];
      if (!bp.is_object()) throw ValidationError("finger.base_pose", "expected an object");
      if (bp.contains("x_mm")) base.x = mm_to_m(number(bp["x_mm"], "finger.base_pose.x_mm"));
      if (bp.contains("y_mm")) base.y = mm_to_m(number(bp["y_mm"], "finger.base_pose.y_mm"));
      if (bp.contains("theta_deg")) base.theta = deg_to_rad(number(bp["theta_deg"], "finger.base_pose.theta_deg"));
    }
    if (!(links[0] > 0.0) || !(links[1] > 0.0))
      throw ValidationError("finger.link_lengths_mm", "link lengths must be strictly positive");
    b.finger = FingerGeometry::make(mm_to_m(links[0]), mm_to_m(links[1]), base);

    if (f.contains("q0_deg")) {
      const Eigen::Vector2d q = vec2(f["q0_deg"], "finger.q0_deg");
      b.grasp.q0 = Eigen::Vector2d(deg_to_rad(q(0)), deg_to_rad(q(1)));
    }
    if (f.contains("grasp_mode")) {
      const std::string mode = f["grasp_mode"].is_string() ? f["grasp_mode"].get<std::string>() : "";
      if (mode == "fixed") b.grasp.mode = GraspMode::fixed;
      else if (mode == "object_normal") b.grasp.mode = GraspMode::object_normal;
      else throw ValidationError("finger.grasp_mode", "expected \"fixed\" or \"object_normal\"");
    }
    if (f.contains("grasp_direction")) {
      const Eigen::Vector2d d = vec2(f["grasp_direction"], "finger.grasp_direction");
      if (std::abs(d.norm() - 1.0) > 1e-9) throw ValidationError("finger.grasp_direction", "must be a unit vector");
      b.grasp.direction = d;
    }
    if (f.contains("object_center_mm")) {
      const Eigen::Vector2d c = vec2(f["object_center_mm"], "finger.object_center_mm");
      b.grasp.object_center = Eigen::Vector2d(mm_to_m(c(0)), mm_to_m(c(1)));
    }
    if (f.contains("deviation_max_mm"))
      b.grasp.deviation_max = mm_to_m(positive(f["deviation_max_mm"], "finger.deviation_max_mm"));
    if (f.contains("deviation_samples")) {
      b.grasp.deviation_samples = count(f["deviation_samples"], "finger.deviation_samples");
      if (b.grasp.deviation_samples < 2) throw ValidationError("finger.deviation_samples", "must be at least 2");
    }
  }

  // dynamics
  {
    const auto& d = raw["dynamics"];
    b.dynamics = DynamicsParams::make(matrix(require(d, "dynamics", "inertia"), "dynamics.inertia"),
                                      matrix(require(d, "dynamics", "damping"), "dynamics.damping"));
    if (b.dynamics.inertia.rows() != b.pulleys.dof())
      throw ShapeError("dynamics matrices must match the joint count of the pulleys");
    if (d.contains("step_deg")) {
      const auto s = vector(d["step_deg"], "dynamics.step_deg");
      if (static_cast<Eigen::Index>(s.size()) != b.pulleys.dof())
        throw ShapeError("dynamics.step_deg must have one entry per joint");
      b.step.q_cmd = Eigen::VectorXd(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) b.step.q_cmd(i) = deg_to_rad(s[i]);
    }
    if (d.contains("horizon_s")) b.step.horizon = positive(d["horizon_s"], "dynamics.horizon_s");
    if (d.contains("dt_s")) b.step.dt = positive(d["dt_s"], "dynamics.dt_s");
    if (b.step.horizon < 100.0 * b.step.dt) throw ValidationError("dynamics.horizon_s", "must be at least 100 dt");
  }

  // schedule
  if (raw.contains("schedule")) {
    const auto& s = raw["schedule"];
    if (!s.is_object()) throw ValidationError("schedule", "expected an object");
    auto& out = b.schedule;
    if (s.contains("q_s_min_deg")) out.q_s_min = deg_to_rad(number(s["q_s_min_deg"], "schedule.q_s_min_deg"));
    if (s.contains("q_s_max_deg")) out.q_s_max = deg_to_rad(number(s["q_s_max_deg"], "schedule.q_s_max_deg"));
    if (s.contains("alpha_min")) out.alpha_min = number(s["alpha_min"], "schedule.alpha_min");
    if (s.contains("alpha_max")) out.alpha_max = number(s["alpha_max"], "schedule.alpha_max");
    if (s.contains("samples")) out.samples = count(s["samples"], "schedule.samples");
    if (s.contains("z_min_mm")) out.z_min = mm_to_m(number(s["z_min_mm"], "schedule.z_min_mm"));
    if (s.contains("z_max_mm")) out.z_max = mm_to_m(number(s["z_max_mm"], "schedule.z_max_mm"));
    if (s.contains("assumption_threshold"))
      out.assumption_threshold = positive(s["assumption_threshold"], "schedule.assumption_threshold");
    if (s.contains("experiment_alphas")) {
      out.experiment_alphas = vector(s["experiment_alphas"], "schedule.experiment_alphas");
      if (out.experiment_alphas.empty()) throw ValidationError("schedule.experiment_alphas", "must not be empty");
    }
    if (s.contains("ellipse_radius_deg"))
      out.ellipse_radius = deg_to_rad(positive(s["ellipse_radius_deg"], "schedule.ellipse_radius_deg"));
    if (s.contains("ellipse_samples")) out.ellipse_samples = count(s["ellipse_samples"], "schedule.ellipse_samples");
    if (!(out.q_s_max > out.q_s_min)) throw ValidationError("schedule.q_s_max_deg", "must exceed q_s_min_deg");
    if (out.samples < 3) throw GridError("schedule.samples must be at least 3");
    if (out.ellipse_samples < 3) throw ValidationError("schedule.ellipse_samples", "must be at least 3");
    if (s.contains("targets")) {
      const auto& t = s["targets"];
      if (!t.is_array()) throw ValidationError("schedule.targets", "expected an array");
      std::vector<StiffnessSchedule::Sample> samples;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string field = "schedule.targets[" + std::to_string(i) + "]";
        if (!t[i].is_object()) throw ValidationError(field, "expected an object");
        const double q = deg_to_rad(number(require(t[i], field, "q_s_deg"), field + ".q_s_deg"));
        const auto& K = require(t[i], field, "K");
        if (K.is_number()) {
          samples.push_back({q, number(K, field + ".K")});
        } else {
          const Eigen::MatrixXd m = matrix(K, field + ".K");
          try {
            samples.push_back({q, StiffnessMatrix(m, Frame::joint)});
          } catch (const NumericalError& e) {
            throw ValidationError(field + ".K", e.what());
          }
        }
      }
      out.explicit_targets = StiffnessSchedule(std::move(samples));
    } else {
      // Validate eagerly so an out-of-range alpha surfaces here.
      (void)out.schedule();
    }
  } else {
    (void)b.schedule.schedule();
  }
  return b;
}

// ---------------------------------------------------------------------------
// SI serialization of a validated bundle (bit-exact round trip).

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& v) {
  Eigen::MatrixXd m(v.size(), v.empty() ? 0 : v[0].size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[i][j].get<double>();
  return m;
}

inline nlohmann::json bundle_to_json(const ModelBundle& b) {
  using json = nlohmann::json;
  json j;
  j["springs"] = {{"k_p", b.springs.k_p}, {"k_s", b.springs.k_s}, {"k_j", b.springs.k_j}};
  j["pulleys"] = {{"R_J", matrix_to_json(b.pulleys.R_J)},
                  {"R_D", matrix_to_json(b.pulleys.R_D)},
                  {"R_P", matrix_to_json(b.pulleys.R_P)},
                  {"n", b.pulleys.n}};
  j["finger"] = {{"link_lengths", {b.finger.link_lengths(0), b.finger.link_lengths(1)}},
                 {"base_pose", {b.finger.base.x, b.finger.base.y, b.finger.base.theta}}};
  j["dynamics"] = {{"inertia", matrix_to_json(b.dynamics.inertia)}, {"damping", matrix_to_json(b.dynamics.damping)}};
  return j;
}

/// Inverse of bundle_to_json for the physical parameters (springs, pulleys, finger, dynamics).
inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  ModelBundle b{};
  b.springs = SpringConstants::make(j["springs"]["k_p"].get<double>(), j["springs"]["k_s"].get<double>(),
                                    j["springs"]["k_j"].get<double>());
  b.pulleys = PulleyGeometry::make(matrix_from_json(j["pulleys"]["R_J"]), matrix_from_json(j["pulleys"]["R_D"]),
                                   matrix_from_json(j["pulleys"]["R_P"]), j["pulleys"]["n"].get<double>());
  const auto& bp = j["finger"]["base_pose"];
  b.finger = FingerGeometry::make(j["finger"]["link_lengths"][0].get<double>(),
                                  j["finger"]["link_lengths"][1].get<double>(),
                                  BasePose{bp[0].get<double>(), bp[1].get<double>(), bp[2].get<double>()});
  b.dynamics = DynamicsParams::make(matrix_from_json(j["dynamics"]["inertia"]),
                                    matrix_from_json(j["dynamics"]["damping"]));
  return b;
}

}  // namespace dsj
