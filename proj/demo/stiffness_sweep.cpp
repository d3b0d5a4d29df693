// Sweeps the shipped finger through its stiffness schedule and prints, per level,
// the passive joint stiffness, its ellipse, the grasp stiffness at the fingertip
// and the step-response frequency.
//
//   dsj_demo [config.json]

#include <cstdio>
#include <exception>
#include <iostream>

#include "dsj/dsj.hpp"

int main(int argc, char** argv) {
  try {
    const nlohmann::json raw = argc > 1 ? dsj::load_config(argv[1]) : dsj::parse_config(dsj::kDefaultConfig);
    const dsj::ModelBundle b = dsj::validate_config(raw);
    const auto& s = b.schedule;

    dsj::SpiralProfile profile = dsj::solve_spiral_radii(s.schedule(), b.pulleys, b.springs);
    profile = dsj::generate_groove(std::move(profile), s.z_min, s.z_max);
    const dsj::GraspFrame frame = b.grasp.mode == dsj::GraspMode::fixed
                                      ? dsj::GraspFrame::fixed(b.grasp.direction)
                                      : dsj::GraspFrame::object_normal(b.grasp.object_center);

    std::printf("%6s %9s %9s %9s %9s %10s %10s %9s %8s\n", "alpha", "r_s1 mm", "K11", "K12", "K22", "major", "minor",
                "K_p N/m", "f Hz");
    for (int i = 0; i <= 12; ++i) {
      const double alpha = s.alpha_min + (s.alpha_max - s.alpha_min) * i / 12.0;
      const double q_s = dsj::q_s_for_alpha(s, alpha);
      const auto K = dsj::passive_from_radii(profile.radii_matrix_at(q_s), b.pulleys, b.springs).K_passive;

      const dsj::DsjTorqueModel joint(b.pulleys, b.springs, profile, q_s);
      const auto ellipse = dsj::stiffness_ellipse([&joint](const Eigen::VectorXd& dq) { return joint(dq); },
                                                  Eigen::Vector2d::Zero(), s.ellipse_radius, s.ellipse_samples);

      const double K_p = dsj::task_space_stiffness_value(K.matrix(), dsj::jacobians(b.finger, b.grasp.q0, frame), 0.0);
      const auto ts = dsj::simulate_step_response(K, b.dynamics, b.step.q_cmd, b.step.horizon, b.step.dt);
      const auto m = dsj::response_metrics(ts, b.step.q_cmd);

      std::printf("%6.3f %9.4f %9.5f %9.5f %9.5f %10.5f %10.5f %9.3f %8.3f\n", alpha,
                  dsj::m_to_mm(profile.radius_at(0, q_s)), K(0, 0), K(0, 1), K(1, 1), ellipse.semi_axes(0),
                  ellipse.semi_axes(1), K_p, m.dominant_frequency);
    }
    std::printf("stiffness in N*m/rad; ellipse regressed at %.1f deg\n", dsj::rad_to_deg(s.ellipse_radius));
    return 0;
  } catch (const dsj::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
