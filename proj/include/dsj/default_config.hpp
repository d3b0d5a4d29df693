#pragma once

// Built-in copy of config/dsj_default.json (the coupled two-joint finger with
// 875.63 N/m springs and 12 mm pulleys). A test keeps the two in sync.

namespace dsj {

inline constexpr const char* kDefaultConfig = R"json({
  "springs": {
    "k_p": 875.63,
    "k_s": 875.63,
    "k_j": 875.63
  },
  "pulleys": {
    "r_j_mm": 12.0,
    "r_d_mm": 12.0,
    "r_p_mm": 12.0,
    "n": 1.0,
    "coupling": "coupled"
  },
  "finger": {
    "link_lengths_mm": [50.0, 40.0],
    "base_pose": { "x_mm": 0.0, "y_mm": 0.0, "theta_deg": 0.0 },
    "q0_deg": [30.0, 45.0],
    "grasp_mode": "fixed",
    "grasp_direction": [1.0, 0.0],
    "object_center_mm": [100.0, 0.0],
    "deviation_max_mm": 10.0,
    "deviation_samples": 21
  },
  "dynamics": {
    "inertia": [[2e-4, 0.0], [0.0, 1e-4]],
    "damping": [[1e-3, 0.0], [0.0, 5e-4]],
    "step_deg": [10.0, 10.0],
    "horizon_s": 4.0,
    "dt_s": 1e-3
  },
  "schedule": {
    "q_s_min_deg": 0.0,
    "q_s_max_deg": 720.0,
    "alpha_min": 0.2,
    "alpha_max": 0.8,
    "samples": 361,
    "z_min_mm": 0.0,
    "z_max_mm": 12.0,
    "assumption_threshold": 0.05,
    "experiment_alphas": [0.2, 0.5, 0.8],
    "ellipse_radius_deg": 20.0,
    "ellipse_samples": 72
  }
}
)json";

}  // namespace dsj
