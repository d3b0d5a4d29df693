#pragma once

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "dsj/default_config.hpp"
#include "dsj/io.hpp"
#include "dsj/model.hpp"

namespace dsj::test {

inline constexpr double kSpring = 875.63;  // N/m, shipped example
inline constexpr double kRadius = 0.012;   // m

inline nlohmann::json default_raw() { return nlohmann::json::parse(kDefaultConfig); }
inline ModelBundle default_bundle() { return validate_config(default_raw()); }

inline SpringConstants example_springs() { return SpringConstants::make(kSpring, kSpring, kSpring); }
inline PulleyGeometry example_pulleys() { return PulleyGeometry::coupled_2dof(kRadius, kRadius, kRadius, 1.0); }

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// Scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dsj_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dsj::test
