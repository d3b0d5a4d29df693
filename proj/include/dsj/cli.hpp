#pragma once

// Subcommand pipelines behind the `dsj` executable. Kept in the library so the
// same code paths are exercised by the tests.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dsj/default_config.hpp"
#include "dsj/errors.hpp"
#include "dsj/io.hpp"
#include "dsj/kinematics.hpp"
#include "dsj/model.hpp"
#include "dsj/sim.hpp"
#include "dsj/stiffness.hpp"
#include "dsj/synthesis.hpp"

namespace dsj::cli {

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"synth", "ellipse", "grasp", "step", "validate"};
  return names;
}

struct CliInvocation {
  std::string subcommand;
  std::filesystem::path config;  // empty: built-in default configuration
  std::filesystem::path out_dir = "dsj_out";
  std::vector<std::string> overrides;
  ProfileFormat profile_format = ProfileFormat::csv;
};

namespace detail {

struct Context {
  nlohmann::json raw;
  ModelBundle bundle;
  std::string config_sha256;
};

inline Context prepare(const CliInvocation& inv) {
  Context ctx;
  ctx.raw = inv.config.empty() ? parse_config(kDefaultConfig) : load_config(inv.config);
  for (const auto& o : inv.overrides) apply_override(ctx.raw, o);
  if (const auto unknown = unknown_config_keys(ctx.raw); !unknown.empty()) throw UnknownKeyError(unknown.front());
  ctx.bundle = validate_config(ctx.raw);
  ctx.config_sha256 = sha256_hex(ctx.raw.dump());
  return ctx;
}

inline SpiralProfile design_profile(const ModelBundle& b) {
  SpiralProfile p = solve_spiral_radii(b.schedule.schedule(), b.pulleys, b.springs);
  return generate_groove(std::move(p), b.schedule.z_min, b.schedule.z_max);
}

inline void require_alpha_schedule(const ModelBundle& b, const std::string& what) {
  if (b.schedule.explicit_targets)
    throw ValidationError("schedule.targets", what + " runs at experiment_alphas and needs the linear alpha schedule");
}

inline StiffnessMatrix passive_at(const ModelBundle& b, const SpiralProfile& p, double q_s) {
  return passive_from_radii(p.radii_matrix_at(q_s), b.pulleys, b.springs).K_passive;
}

inline nlohmann::json report_json(const AssumptionReport& r) {
  return {{"max_slope_ratio_r", r.max_slope_ratio_r},
          {"max_slope_ratio_z", r.max_slope_ratio_z},
          {"arc_length_rel_error", r.arc_length_rel_error},
          {"threshold", r.threshold},
          {"slope_r_ok", r.slope_r_ok},
          {"slope_z_ok", r.slope_z_ok},
          {"arc_length_ok", r.arc_length_ok}};
}

inline nlohmann::json matrix_json(const StiffnessMatrix& K) { return matrix_to_json(K.matrix()); }

inline void describe_report(std::ostream& err, const AssumptionReport& r) {
  auto flag = [](bool ok) { return ok ? "pass" : "FAIL"; };
  err << "assumptions (threshold " << r.threshold << "):\n"
      << "  max |dR/dq|/R   = " << r.max_slope_ratio_r << "  " << flag(r.slope_r_ok) << '\n'
      << "  max |dZ/dq|/R   = " << r.max_slope_ratio_z << "  " << flag(r.slope_z_ok) << '\n'
      << "  arc length gap  = " << r.arc_length_rel_error << "  " << flag(r.arc_length_ok) << '\n';
}

}  // namespace detail

/// Runs one subcommand. Diagnostics go to `err`; `out` receives only the manifest path.
/// Returns 0 on success or the exit code of the error category.
inline int run(const CliInvocation& inv, std::ostream& out, std::ostream& err,
               const std::vector<std::string>& argv_echo = {}) {
  try {
    const detail::Context ctx = detail::prepare(inv);
    const ModelBundle& b = ctx.bundle;
    RunManifest manifest;
    manifest.config_sha256 = ctx.config_sha256;
    manifest.subcommand = inv.subcommand;
    manifest.arguments = argv_echo;
    std::vector<Artifact> artifacts;
    err << std::setprecision(6);

    if (inv.subcommand == "synth" || inv.subcommand == "validate") {
      const SpiralProfile profile = detail::design_profile(b);
      const AssumptionReport report = validate_assumptions(profile, b.schedule.assumption_threshold);
      nlohmann::json radii = nlohmann::json::array();
      for (std::size_t j = 0; j < profile.joints(); ++j)
        radii.push_back({{"joint", j}, {"r_first_m", profile.r_s[j].front()}, {"r_last_m", profile.r_s[j].back()}});
      manifest.summary["endpoint_radii"] = radii;
      manifest.summary["assumptions"] = detail::report_json(report);
      manifest.summary["warnings"] = profile.warnings;
      manifest.summary["K_max"] = detail::matrix_json(k_max(b.pulleys, b.springs));
      for (std::size_t j = 0; j < profile.joints(); ++j)
        err << "joint " << j << ": r_s " << m_to_mm(profile.r_s[j].front()) << " mm -> "
            << m_to_mm(profile.r_s[j].back()) << " mm over " << profile.samples() << " samples\n";
      for (const auto& w : profile.warnings) err << "warning: " << w << '\n';
      detail::describe_report(err, report);
      if (inv.subcommand == "synth") {
        if (inv.profile_format == ProfileFormat::csv)
          artifacts.push_back({"profile.csv", profile_to_csv(profile)});
        else
          artifacts.push_back({"profile.json", profile_to_json(profile).dump(1) + "\n"});
      }
    } else if (inv.subcommand == "ellipse") {
      detail::require_alpha_schedule(b, "ellipse");
      const SpiralProfile profile = detail::design_profile(b);
      std::vector<EllipseRecord> rows;
      nlohmann::json table = nlohmann::json::array();
      for (const double alpha : b.schedule.experiment_alphas) {
        const double q_s = q_s_for_alpha(b.schedule, alpha);
        const DsjTorqueModel model(b.pulleys, b.springs, profile, q_s);
        const TorqueModel torque = [&model](const Eigen::VectorXd& dq) { return model(dq); };
        EllipseResult res =
            stiffness_ellipse(torque, Eigen::Vector2d::Zero(), b.schedule.ellipse_radius, b.schedule.ellipse_samples);
        const double rel = linalg::relative_frobenius(res.K_regressed.matrix(), model.linearized().matrix());
        err << "alpha " << alpha << ": semi-axes " << res.semi_axes(0) << ", " << res.semi_axes(1)
            << " N*m/rad, orientation " << rad_to_deg(res.orientation) << " deg, rel. error vs analytic " << rel << '\n';
        table.push_back({{"alpha", alpha}, {"q_s", q_s}, {"rel_frobenius_error", rel}});
        rows.push_back({alpha, q_s, std::move(res), model.linearized()});
      }
      manifest.summary["ellipses"] = table;
      artifacts.push_back({"ellipse.csv", ellipse_csv(rows)});
    } else if (inv.subcommand == "grasp") {
      detail::require_alpha_schedule(b, "grasp");
      const SpiralProfile profile = detail::design_profile(b);
      const GraspFrame frame = b.grasp.mode == GraspMode::fixed ? GraspFrame::fixed(b.grasp.direction)
                                                                : GraspFrame::object_normal(b.grasp.object_center);
      const auto grid = uniform_grid(0.0, b.grasp.deviation_max, b.grasp.deviation_samples);
      std::vector<std::pair<double, std::vector<GraspPoint>>> curves;
      nlohmann::json table = nlohmann::json::array();
      for (const double alpha : b.schedule.experiment_alphas) {
        const double q_s = q_s_for_alpha(b.schedule, alpha);
        const GraspModel model{b.finger, frame, detail::passive_at(b, profile, q_s)};
        auto curve = grasp_force_curve(model, b.grasp.q0, grid);
        err << "alpha " << alpha << ": K_p(0) = " << curve.front().K_p << " N/m, F_p(" << m_to_mm(grid.back())
            << " mm) = " << curve.back().F_p << " N\n";
        table.push_back({{"alpha", alpha}, {"K_p0", curve.front().K_p}, {"F_p_max", curve.back().F_p}});
        curves.emplace_back(alpha, std::move(curve));
      }
      manifest.summary["grasp"] = table;
      artifacts.push_back({"grasp.csv", grasp_csv(curves)});
    } else if (inv.subcommand == "step") {
      detail::require_alpha_schedule(b, "step");
      const SpiralProfile profile = detail::design_profile(b);
      std::vector<std::pair<double, TimeSeries>> runs;
      nlohmann::json table = nlohmann::json::array();
      err << "alpha  overshoot  settling_s  frequency_Hz  settled\n";
      for (const double alpha : b.schedule.experiment_alphas) {
        const double q_s = q_s_for_alpha(b.schedule, alpha);
        const StiffnessMatrix K = detail::passive_at(b, profile, q_s);
        TimeSeries ts = simulate_step_response(K, b.dynamics, b.step.q_cmd, b.step.horizon, b.step.dt);
        const ResponseMetrics m = response_metrics(ts, b.step.q_cmd);
        err << alpha << "  " << m.overshoot << "  " << m.settling_time << "  " << m.dominant_frequency << "  "
            << (m.settled ? "yes" : "no") << '\n';
        table.push_back({{"alpha", alpha},
                         {"overshoot", m.overshoot},
                         {"settling_time_s", m.settling_time},
                         {"dominant_frequency_hz", m.dominant_frequency},
                         {"settled", m.settled}});
        runs.emplace_back(alpha, std::move(ts));
      }
      manifest.summary["step"] = table;
      artifacts.push_back({"step.csv", step_csv(runs)});
    } else {
      throw ValidationError("subcommand", "unknown subcommand '" + inv.subcommand + "'");
    }

    const RunManifest written = write_results(artifacts, inv.out_dir, std::move(manifest));
    out << written.manifest_path.string() << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::numerical);
  }
}

}  // namespace dsj::cli
