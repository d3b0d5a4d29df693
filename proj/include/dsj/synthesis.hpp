#pragma once

// Spiral-joint synthesis: from a stiffness schedule to spiral radii, then to the
// mirrored groove centrelines, plus checks of the small-slope assumptions the
// synthesis relies on and profile export.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dsj/errors.hpp"
#include "dsj/format.hpp"
#include "dsj/linalg.hpp"
#include "dsj/model.hpp"
#include "dsj/stiffness.hpp"

namespace dsj {

struct GroovePoint {
  double q_s = 0.0;    // spiral angle this point belongs to (rad)
  double theta = 0.0;  // polar angle of the centreline point (rad)
  double r = 0.0;      // m
  double z = 0.0;      // m
};

/// Primary groove (theta = q_s) and its antagonist mirror (theta = -q_s).
struct GroovePair {
  std::vector<GroovePoint> primary;
  std::vector<GroovePoint> mirrored;
};

struct SpiralProfile {
  std::vector<double> q_s;               // rad, strictly increasing
  std::vector<std::vector<double>> r_s;  // [joint][sample], m
  std::vector<double> z_s;               // m, empty until grooves are generated
  std::vector<GroovePair> grooves;       // one pair per joint
  std::vector<std::string> warnings;

  std::size_t joints() const noexcept { return r_s.size(); }
  std::size_t samples() const noexcept { return q_s.size(); }
  bool has_radii() const noexcept { return !r_s.empty() && !q_s.empty(); }
  bool has_grooves() const noexcept { return !z_s.empty() && grooves.size() == r_s.size(); }

  /// Segment used for q; the end segments extend beyond the grid.
  std::size_t segment(double q) const {
    if (q_s.size() < 2) throw GridError("profile needs at least 2 samples");
    const auto it = std::upper_bound(q_s.begin(), q_s.end(), q);
    const std::ptrdiff_t idx = std::distance(q_s.begin(), it) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(q_s.size()) - 2));
  }

  double segment_slope(std::size_t joint, std::size_t k) const {
    return (r_s[joint][k + 1] - r_s[joint][k]) / (q_s[k + 1] - q_s[k]);
  }

  /// Piecewise-linear radius, linearly extrapolated outside the grid.
  double radius_at(std::size_t joint, double q) const {
    const std::size_t k = segment(q);
    return r_s[joint][k] + segment_slope(joint, k) * (q - q_s[k]);
  }

  double radius_slope_at(std::size_t joint, double q) const { return segment_slope(joint, segment(q)); }

  /// Tendon length wrapped from q_from over a signed span, integral of r dq (exact
  /// for the piecewise-linear radius). Taking the span itself rather than an end
  /// angle keeps small spans at full relative precision.
  double wrapped_length(std::size_t joint, double q_from, double span) const {
    if (span < 0.0) return -wrapped_length(joint, q_from + span, -span);
    double acc = 0.0;
    double a = q_from;
    double left = span;
    for (std::size_t k = segment(q_from); left > 0.0; ++k) {
      const bool last = k + 2 >= q_s.size();
      const double piece = last ? left : std::min(left, q_s[k + 1] - a);
      if (piece > 0.0) {
        // Linear radius: the integral is the span times the midpoint radius.
        acc += piece * (r_s[joint][k] + segment_slope(joint, k) * ((a - q_s[k]) + 0.5 * piece));
        left -= piece;
      }
      if (last) break;
      a = q_s[k + 1];
    }
    return acc;
  }

  Eigen::MatrixXd radii_matrix_at(double q) const {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(joints(), joints());
    for (std::size_t j = 0; j < joints(); ++j) R(j, j) = radius_at(j, q);
    return R;
  }
};

// ---------------------------------------------------------------------------
// Inverse problem

/// Relative tolerance on the off-diagonal part of the radius-space stiffness.
inline constexpr double kStructureTol = 1e-6;

/// Solves the spiral radii for every schedule sample. The required spiral-path
/// stiffness K_S,j is mapped back through C = R_D^-1 R_J into
/// D = C^-T K_S,j C^-1 / k_s, which must be diagonal; its entries are r_s^2.
/// For the coupled finger this is r_s2^2 = K22 / (c^2 k_s) and
/// r_s1^2 = (K11 - K22) / (c^2 k_s) with K12 = K22 required.
inline SpiralProfile solve_spiral_radii(const StiffnessSchedule& schedule, const PulleyGeometry& pulleys,
                                        const SpringConstants& springs) {
  if (schedule.size() == 0) throw GridError("empty schedule");
  const Eigen::Index dof = pulleys.dof();
  const Eigen::MatrixXd C = pulleys.R_D.inverse() * pulleys.R_J;
  if (linalg::singular_value_ratio(C) < 1e-12) throw SingularityError("R_D^-1 R_J");
  const Eigen::MatrixXd C_inv = C.inverse();
  const StiffnessMatrix Kmax = k_max(pulleys, springs);

  SpiralProfile out;
  out.r_s.assign(dof, std::vector<double>(schedule.size(), 0.0));
  out.q_s.reserve(schedule.size());

  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& sample = schedule.samples()[i];
    const std::string where = "q_s = " + format_double(sample.q_s) + " rad";
    StiffnessMatrix target;
    if (const double* alpha = std::get_if<double>(&sample.target)) {
      if (!(*alpha > 0.0 && *alpha < 1.0))
        throw InfeasibleTargetError("alpha = " + format_double(*alpha) + " outside (0, 1) at " + where, *alpha);
      target = StiffnessMatrix(*alpha * Kmax.matrix(), Frame::joint);
    } else {
      target = std::get<StiffnessMatrix>(sample.target);
    }

    StiffnessMatrix K_S;
    try {
      K_S = required_spiral_stiffness(target, pulleys, springs);
    } catch (const InfeasibleTargetError& e) {
      std::string msg = e.what();
      const std::string prefix = "infeasible target: ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      throw InfeasibleTargetError(msg + " at " + where, e.eigenvalue());
    }

    const Eigen::MatrixXd D = C_inv.transpose() * K_S.matrix() * C_inv / springs.k_s;
    const double scale = D.diagonal().cwiseAbs().maxCoeff();
    double off = 0.0;
    for (Eigen::Index a = 0; a < dof; ++a)
      for (Eigen::Index b = 0; b < dof; ++b)
        if (a != b) off = std::max(off, std::abs(D(a, b)));
    const double residual = scale > 0.0 ? off / scale : off;
    if (residual > kStructureTol)
      throw StructureError("coupling residual " + format_double(residual) + " at " + where, residual);

    for (Eigen::Index j = 0; j < dof; ++j) {
      double d = D(j, j);
      if (d < 0.0) {
        if (-d > kStructureTol * scale)
          throw StructureError("negative squared radius for joint " + std::to_string(j) + " at " + where, -d / scale);
        d = 0.0;
      }
      if (d <= kStructureTol * scale)
        out.warnings.push_back("spiral radius of joint " + std::to_string(j) + " is zero at " + where);
      out.r_s[j][i] = std::sqrt(d);
    }
    out.q_s.push_back(sample.q_s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grooves

/// Maximum angular spacing of emitted groove polylines (rad).
inline constexpr double kGrooveSpacing = kPi / 180.0;

inline SpiralProfile generate_groove(SpiralProfile profile, double z_lo, double z_hi) {
  if (!profile.has_radii()) throw StateError("spiral radii have not been solved");
  if (profile.samples() < 2) throw GridError("profile needs at least 2 samples");
  for (const auto& r : profile.r_s)
    if (r.size() != profile.samples()) throw StateError("radius samples do not match the q_s grid");
  if (!(z_hi > z_lo)) throw DomainError("groove elevation range must be increasing (z_hi > z_lo)");

  const double q0 = profile.q_s.front();
  const double q1 = profile.q_s.back();
  const double span = q1 - q0;
  auto elevation = [&](double q) { return z_lo + (q - q0) / span * (z_hi - z_lo); };

  profile.z_s.resize(profile.samples());
  for (std::size_t k = 0; k < profile.samples(); ++k) profile.z_s[k] = elevation(profile.q_s[k]);
  profile.z_s.front() = z_lo;
  profile.z_s.back() = z_hi;

  const auto segments = static_cast<std::size_t>(std::ceil(span / kGrooveSpacing - 1e-9));
  profile.grooves.assign(profile.joints(), {});
  for (std::size_t j = 0; j < profile.joints(); ++j) {
    auto& pair = profile.grooves[j];
    pair.primary.reserve(segments + 1);
    pair.mirrored.reserve(segments + 1);
    for (std::size_t i = 0; i <= segments; ++i) {
      const double q = (i == segments) ? q1 : q0 + span * static_cast<double>(i) / static_cast<double>(segments);
      const double z = (i == segments) ? z_hi : (i == 0 ? z_lo : elevation(q));
      const GroovePoint p{q, q, profile.radius_at(j, q), z};
      pair.primary.push_back(p);
      pair.mirrored.push_back(GroovePoint{p.q_s, -p.theta, p.r, p.z});
    }
  }
  return profile;
}

// ---------------------------------------------------------------------------
// Assumption checks

struct AssumptionReport {
  double max_slope_ratio_r = 0.0;     // max |dR/dq| / R
  double max_slope_ratio_z = 0.0;     // max |dZ/dq| / R
  double arc_length_rel_error = 0.0;  // (exact - approx) / exact over the whole groove
  double threshold = 0.05;
  bool slope_r_ok = true;
  bool slope_z_ok = true;
  bool arc_length_ok = true;

  bool all_pass() const noexcept { return slope_r_ok && slope_z_ok && arc_length_ok; }
};

namespace detail {

/// Derivative on a non-uniform grid: centred inside, one-sided at the ends.
inline std::vector<double> gradient(const std::vector<double>& y, const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> g(n, 0.0);
  if (n < 2) return g;
  g.front() = (y[1] - y[0]) / (x[1] - x[0]);
  g.back() = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    // Second-order accurate on non-uniform spacing; reduces to (y+ - y-)/(2h) when uniform.
    g[i] = (h0 * h0 * y[i + 1] - h1 * h1 * y[i - 1] + (h1 * h1 - h0 * h0) * y[i]) / (h0 * h1 * (h0 + h1));
  }
  return g;
}

inline void require_grooves(const SpiralProfile& p) {
  if (p.samples() < 3) throw GridError("at least 3 samples are required, got " + std::to_string(p.samples()));
  if (!p.has_grooves()) throw StateError("grooves have not been generated");
}

}  // namespace detail

/// Cumulative wrapped tendon length per joint: exact arc length of the 3D groove
/// and the approximation integral of R dq used by the stiffness model.
struct ArcLength {
  std::vector<std::vector<double>> exact;   // [joint][sample], m
  std::vector<std::vector<double>> approx;  // [joint][sample], m
};

inline ArcLength groove_arc_length(const SpiralProfile& profile) {
  detail::require_grooves(profile);
  const auto& q = profile.q_s;
  const std::vector<double> dz = detail::gradient(profile.z_s, q);
  ArcLength out;
  for (std::size_t j = 0; j < profile.joints(); ++j) {
    const auto& r = profile.r_s[j];
    const std::vector<double> dr = detail::gradient(r, q);
    std::vector<double> exact(q.size(), 0.0), approx(q.size(), 0.0);
    auto integrand = [&](std::size_t k) { return std::sqrt(dr[k] * dr[k] + r[k] * r[k] + dz[k] * dz[k]); };
    for (std::size_t k = 1; k < q.size(); ++k) {
      const double h = q[k] - q[k - 1];
      exact[k] = exact[k - 1] + 0.5 * h * (integrand(k - 1) + integrand(k));
      approx[k] = approx[k - 1] + 0.5 * h * (r[k - 1] + r[k]);
    }
    out.exact.push_back(std::move(exact));
    out.approx.push_back(std::move(approx));
  }
  return out;
}

inline AssumptionReport validate_assumptions(const SpiralProfile& profile, double threshold = 0.05) {
  detail::require_grooves(profile);
  if (!(threshold > 0.0)) throw DomainError("assumption threshold must be positive");
  AssumptionReport rep;
  rep.threshold = threshold;
  const std::vector<double> dz = detail::gradient(profile.z_s, profile.q_s);
  const ArcLength arc = groove_arc_length(profile);
  for (std::size_t j = 0; j < profile.joints(); ++j) {
    const auto& r = profile.r_s[j];
    const std::vector<double> dr = detail::gradient(r, profile.q_s);
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double inf = std::numeric_limits<double>::infinity();
      rep.max_slope_ratio_r = std::max(rep.max_slope_ratio_r, r[k] > 0.0 ? std::abs(dr[k]) / r[k] : (dr[k] == 0.0 ? 0.0 : inf));
      rep.max_slope_ratio_z = std::max(rep.max_slope_ratio_z, r[k] > 0.0 ? std::abs(dz[k]) / r[k] : (dz[k] == 0.0 ? 0.0 : inf));
    }
    const double exact = arc.exact[j].back();
    const double approx = arc.approx[j].back();
    if (exact > 0.0) rep.arc_length_rel_error = std::max(rep.arc_length_rel_error, (exact - approx) / exact);
  }
  rep.slope_r_ok = rep.max_slope_ratio_r <= threshold;
  rep.slope_z_ok = rep.max_slope_ratio_z <= threshold;
  rep.arc_length_ok = rep.arc_length_rel_error <= threshold;
  return rep;
}

// ---------------------------------------------------------------------------
// Export

enum class ProfileFormat { csv, json };

/// CSV columns: q_s_rad, theta_deg, r_mm, z_mm, joint_index, groove_side
/// (side 0 is the primary groove, side 1 its mirrored antagonist).
inline std::string profile_to_csv(const SpiralProfile& profile) {
  if (profile.samples() == 0) throw GridError("empty profile grid");
  if (!profile.has_grooves()) throw StateError("grooves have not been generated");
  std::ostringstream os;
  os << "q_s_rad,theta_deg,r_mm,z_mm,joint_index,groove_side\n";
  for (std::size_t j = 0; j < profile.joints(); ++j) {
    for (int side = 0; side < 2; ++side) {
      const auto& line = side == 0 ? profile.grooves[j].primary : profile.grooves[j].mirrored;
      for (const auto& p : line)
        os << format_double(p.q_s) << ',' << format_double(rad_to_deg(p.theta)) << ',' << format_double(m_to_mm(p.r))
           << ',' << format_double(m_to_mm(p.z)) << ',' << j << ',' << side << '\n';
    }
  }
  return os.str();
}

/// JSON polyline document, SI units (rad, m).
inline nlohmann::json profile_to_json(const SpiralProfile& profile) {
  if (profile.samples() == 0) throw GridError("empty profile grid");
  if (!profile.has_grooves()) throw StateError("grooves have not been generated");
  using json = nlohmann::json;
  json doc;
  doc["format"] = "dsj.spiral_profile";
  doc["version"] = 1;
  doc["units"] = {{"angle", "rad"}, {"length", "m"}};
  doc["q_s"] = profile.q_s;
  doc["r_s"] = profile.r_s;
  doc["z_s"] = profile.z_s;
  doc["warnings"] = profile.warnings;
  json grooves = json::array();
  for (std::size_t j = 0; j < profile.joints(); ++j) {
    for (int side = 0; side < 2; ++side) {
      const auto& line = side == 0 ? profile.grooves[j].primary : profile.grooves[j].mirrored;
      json g;
      g["joint"] = j;
      g["side"] = side;
      std::vector<double> q, th, r, z;
      for (const auto& p : line) {
        q.push_back(p.q_s);
        th.push_back(p.theta);
        r.push_back(p.r);
        z.push_back(p.z);
      }
      g["q_s"] = q;
      g["theta"] = th;
      g["r"] = r;
      g["z"] = z;
      grooves.push_back(std::move(g));
    }
  }
  doc["grooves"] = std::move(grooves);
  return doc;
}

inline SpiralProfile profile_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "dsj.spiral_profile") throw ParseError("not a spiral profile document");
    SpiralProfile p;
    p.q_s = doc.at("q_s").get<std::vector<double>>();
    p.r_s = doc.at("r_s").get<std::vector<std::vector<double>>>();
    p.z_s = doc.at("z_s").get<std::vector<double>>();
    p.warnings = doc.value("warnings", std::vector<std::string>{});
    p.grooves.assign(p.r_s.size(), {});
    for (const auto& g : doc.at("grooves")) {
      const auto joint = g.at("joint").get<std::size_t>();
      const int side = g.at("side").get<int>();
      if (joint >= p.grooves.size() || (side != 0 && side != 1)) throw ParseError("groove index out of range");
      const auto q = g.at("q_s").get<std::vector<double>>();
      const auto th = g.at("theta").get<std::vector<double>>();
      const auto r = g.at("r").get<std::vector<double>>();
      const auto z = g.at("z").get<std::vector<double>>();
      if (th.size() != q.size() || r.size() != q.size() || z.size() != q.size())
        throw ParseError("groove arrays differ in length");
      auto& line = side == 0 ? p.grooves[joint].primary : p.grooves[joint].mirrored;
      for (std::size_t i = 0; i < q.size(); ++i) line.push_back({q[i], th[i], r[i], z[i]});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
}

inline void export_profile(const SpiralProfile& profile, ProfileFormat format, const std::filesystem::path& path) {
  const std::string text = format == ProfileFormat::csv ? profile_to_csv(profile) : profile_to_json(profile).dump(1) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dsj
