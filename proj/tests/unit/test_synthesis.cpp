#include "support.hpp"

#include <fstream>

#include "dsj/synthesis.hpp"

using namespace dsj;
using namespace dsj::test;

namespace {

double alpha_at(double q) { return 0.2 + 0.6 * q / (4.0 * kPi); }
double radius_oracle(double alpha) { return kRadius * std::sqrt(alpha / (2.0 * (1.0 - alpha))); }

SpiralProfile example_radii(double q_hi = 4.0 * kPi, std::size_t samples = 361) {
  return solve_spiral_radii(StiffnessSchedule::linear_alpha(0.0, q_hi, 0.2, 0.8, samples), example_pulleys(),
                            example_springs());
}

SpiralProfile example_profile() { return generate_groove(example_radii(), 0.0, 0.012); }

/// Independent quadrature of the groove lengths for the example schedule, on a 10x finer grid.
std::pair<double, double> fine_lengths(double q_hi, double z_hi) {
  const std::size_t n = 3601;
  const double h = q_hi / static_cast<double>(n - 1);
  double exact = 0.0, approx = 0.0;
  auto r = [&](double q) { return radius_oracle(0.2 + 0.6 * q / q_hi); };
  auto dr = [&](double q) {
    const double a = 0.2 + 0.6 * q / q_hi;
    return r(q) * (0.6 / q_hi) / (2.0 * a * (1.0 - a));
  };
  const double dz = z_hi / q_hi;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double q0 = h * static_cast<double>(k), q1 = q0 + h;
    auto f = [&](double q) { return std::sqrt(dr(q) * dr(q) + r(q) * r(q) + dz * dz); };
    exact += 0.5 * h * (f(q0) + f(q1));
    approx += 0.5 * h * (r(q0) + r(q1));
  }
  return {exact, approx};
}

}  // namespace

TEST_CASE("example schedule gives equal radii on both joints", "[synthesis]") {
  const SpiralProfile p = example_radii();
  REQUIRE(p.joints() == 2);
  REQUIRE(p.samples() == 361);
  for (std::size_t k = 0; k < p.samples(); ++k) {
    CHECK(rel_err(p.r_s[0][k], p.r_s[1][k]) < 1e-12);
    CHECK(rel_err(p.r_s[1][k], radius_oracle(alpha_at(p.q_s[k]))) < 1e-9);
  }
  CHECK(rel_err(p.r_s[1].front(), radius_oracle(0.2)) < 1e-6);
  CHECK(rel_err(p.r_s[1].back(), radius_oracle(0.8)) < 1e-6);
  CHECK(m_to_mm(p.r_s[1].front()) == Catch::Approx(4.2426).epsilon(1e-5));
  CHECK(m_to_mm(p.r_s[1].back()) == Catch::Approx(16.9706).epsilon(1e-5));
  CHECK(p.warnings.empty());
}

TEST_CASE("alpha one half gives r_j over root two", "[synthesis]") {
  const auto p = solve_spiral_radii(StiffnessSchedule({{0.0, 0.5}, {1.0, 0.5}}), example_pulleys(), example_springs());
  CHECK(rel_err(p.r_s[0][0], kRadius / std::sqrt(2.0)) < 1e-12);
  CHECK(m_to_mm(p.r_s[1][1]) == Catch::Approx(8.4853).epsilon(1e-5));
}

TEST_CASE("recomposed radii reproduce the schedule", "[synthesis][property]") {
  const auto pulleys = example_pulleys();
  const auto springs = example_springs();
  const Eigen::MatrixXd Kmax = k_max(pulleys, springs).matrix();
  const SpiralProfile p = example_radii();
  for (std::size_t k = 0; k < p.samples(); ++k) {
    const auto K_S = coupled_stiffness_2dof(p.r_s[0][k], p.r_s[1][k], pulleys.n, springs.k_s);
    const auto br = compose_passive(position_path_stiffness(pulleys, springs), to_differential(K_S, pulleys.n),
                                    joint_path_stiffness(pulleys, springs), pulleys.n);
    CHECK(rel_err(br.K_passive.matrix(), alpha_at(p.q_s[k]) * Kmax) < 1e-9);
  }
}

TEST_CASE("random matrix schedules are realized exactly", "[synthesis][property]") {
  // Targets built from random radii are structurally realizable by construction.
  const auto springs = example_springs();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> rad(0.002, 0.03), ratio(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double r_j = 0.012, r_d = r_j * ratio(rng);
    const auto pulleys = PulleyGeometry::coupled_2dof(r_j, r_d, r_d);
    std::vector<StiffnessSchedule::Sample> samples;
    for (int k = 0; k < 25; ++k) {
      const Eigen::MatrixXd R_S = Eigen::Vector2d(rad(rng), rad(rng)).asDiagonal();
      samples.push_back({0.1 * k, passive_from_radii(R_S, pulleys, springs).K_passive});
    }
    const StiffnessSchedule schedule(samples);
    const SpiralProfile p = solve_spiral_radii(schedule, pulleys, springs);
    for (std::size_t k = 0; k < p.samples(); ++k) {
      const auto K = passive_from_radii(p.radii_matrix_at(p.q_s[k]), pulleys, springs).K_passive;
      CHECK(rel_err(K.matrix(), std::get<StiffnessMatrix>(samples[k].target).matrix()) < 1e-9);
    }
  }
}

TEST_CASE("infeasible and unrealizable targets", "[synthesis]") {
  const auto pulleys = example_pulleys();
  const auto springs = example_springs();
  const Eigen::MatrixXd Kmax = k_max(pulleys, springs).matrix();

  CHECK_THROWS_AS(StiffnessSchedule({{0.0, 0.5}, {1.0, 1.0}}), InfeasibleTargetError);

  const StiffnessSchedule too_stiff({{0.0, StiffnessMatrix(0.5 * Kmax, Frame::joint)},
                                     {0.25, StiffnessMatrix(1.01 * Kmax, Frame::joint)}});
  CHECK_THROWS_WITH(solve_spiral_radii(too_stiff, pulleys, springs), Catch::Matchers::ContainsSubstring("q_s = 0.25"));
  CHECK_THROWS_AS(solve_spiral_radii(too_stiff, pulleys, springs), InfeasibleTargetError);

  // A diagonal target needs K_S with K12 != K22, which the coupled spirals cannot produce.
  const StiffnessSchedule diagonal({{0.0, StiffnessMatrix(0.02 * Eigen::MatrixXd::Identity(2, 2), Frame::joint)}});
  try {
    solve_spiral_radii(diagonal, pulleys, springs);
    FAIL("expected structure error");
  } catch (const StructureError& e) {
    CHECK(e.residual() > 1e-6);
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("tiny asymmetry in a realizable target is tolerated", "[synthesis]") {
  const auto pulleys = example_pulleys();
  const auto springs = example_springs();
  const Eigen::MatrixXd R_S = Eigen::Vector2d(0.006, 0.009).asDiagonal();
  Eigen::MatrixXd K = passive_from_radii(R_S, pulleys, springs).K_passive.matrix();
  K(0, 1) *= 1.0 + 1e-11;
  K(1, 0) *= 1.0 - 1e-11;
  const auto p = solve_spiral_radii(StiffnessSchedule({{0.0, StiffnessMatrix(K, Frame::joint)}}), pulleys, springs);
  CHECK(rel_err(p.r_s[0][0], 0.006) < 1e-7);
  CHECK(rel_err(p.r_s[1][0], 0.009) < 1e-7);
}

TEST_CASE("vanishing first radius is solved with a warning", "[synthesis]") {
  // r_s1 = 0 exactly would make K_passive singular, which the strict window excludes;
  // a radius this small is below the structure tolerance and gets flagged.
  const auto pulleys = example_pulleys();
  const auto springs = example_springs();
  const Eigen::MatrixXd R_S = Eigen::Vector2d(2e-6, 0.009).asDiagonal();
  const auto K = passive_from_radii(R_S, pulleys, springs).K_passive;
  const auto p = solve_spiral_radii(StiffnessSchedule({{0.0, K}}), pulleys, springs);
  CHECK(p.r_s[0][0] < 1e-5);
  // The target is conditioned near 1e8 here, so the radius itself is looser than the recomposition.
  CHECK(rel_err(p.r_s[1][0], 0.009) < 1e-7);
  CHECK(rel_err(passive_from_radii(Eigen::Vector2d(p.r_s[0][0], p.r_s[1][0]).asDiagonal(), pulleys, springs).K_passive.matrix(), K.matrix()) < 1e-9);
  REQUIRE(p.warnings.size() == 1);
  CHECK_THAT(p.warnings.front(), Catch::Matchers::ContainsSubstring("joint 0"));

  const Eigen::MatrixXd singular = passive_from_radii(Eigen::Vector2d(1e-3, 0.009).asDiagonal(), pulleys, springs)
                                       .K_passive.matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(singular);
  Eigen::VectorXd ev = es.eigenvalues();
  ev(0) = 0.0;
  const StiffnessMatrix flat(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose(), Frame::joint);
  CHECK_THROWS_AS(solve_spiral_radii(StiffnessSchedule({{0.0, flat}}), pulleys, springs), InfeasibleTargetError);
}

TEST_CASE("monotone alpha gives monotone radii", "[synthesis][property]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> a(0.01, 0.99);
  for (int i = 0; i < 50; ++i) {
    double lo = a(rng), hi = a(rng);
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-3) continue;
    const auto p = solve_spiral_radii(StiffnessSchedule::linear_alpha(0.0, 4.0 * kPi, lo, hi, 61), example_pulleys(),
                                      example_springs());
    for (std::size_t k = 1; k < p.samples(); ++k) CHECK(p.r_s[1][k] > p.r_s[1][k - 1]);
  }
}

TEST_CASE("groove generation", "[synthesis]") {
  const SpiralProfile p = example_profile();
  SECTION("elevation spans the range exactly") {
    CHECK(p.z_s.front() == 0.0);
    CHECK(p.z_s.back() == 0.012);
    for (std::size_t k = 1; k < p.samples(); ++k) CHECK(p.z_s[k] > p.z_s[k - 1]);
  }
  SECTION("one-degree polylines") {
    for (const auto& pair : p.grooves) {
      REQUIRE(pair.primary.size() >= 721);
      CHECK(pair.primary.front().z == 0.0);
      CHECK(pair.primary.back().z == 0.012);
      CHECK(pair.primary.back().theta == 4.0 * kPi);
      for (std::size_t i = 1; i < pair.primary.size(); ++i)
        CHECK(pair.primary[i].theta - pair.primary[i - 1].theta <= kPi / 180.0 * (1.0 + 1e-12));
    }
  }
  SECTION("antagonist groove is an exact mirror") {
    for (const auto& pair : p.grooves) {
      REQUIRE(pair.primary.size() == pair.mirrored.size());
      for (std::size_t i = 0; i < pair.primary.size(); ++i) {
        CHECK(pair.mirrored[i].r == pair.primary[i].r);
        CHECK(pair.mirrored[i].z == pair.primary[i].z);
        CHECK(pair.mirrored[i].theta == -pair.primary[i].theta);
      }
    }
  }
  SECTION("groove radii follow the solved samples") {
    const auto& line = p.grooves[0].primary;
    CHECK(line.front().r == p.r_s[0].front());
    CHECK(rel_err(line.back().r, p.r_s[0].back()) < 1e-14);
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(generate_groove(example_radii(), 0.005, 0.005), DomainError);
    CHECK_THROWS_AS(generate_groove(SpiralProfile{}, 0.0, 0.012), StateError);
  }
}

TEST_CASE("assumption report on a circle", "[synthesis]") {
  SpiralProfile p;
  p.q_s = {0.0, 1.0, 2.0, 3.0};
  p.r_s = {{0.01, 0.01, 0.01, 0.01}};
  p.z_s = {0.0, 0.0, 0.0, 0.0};
  p.grooves.resize(1);
  const auto rep = validate_assumptions(p);
  CHECK(rep.max_slope_ratio_r == 0.0);
  CHECK(rep.max_slope_ratio_z == 0.0);
  CHECK(rep.arc_length_rel_error == 0.0);
  CHECK(rep.all_pass());
  const auto arc = groove_arc_length(p);
  CHECK(arc.exact[0].back() == Catch::Approx(0.03).epsilon(1e-15));
  CHECK(arc.approx[0].back() == Catch::Approx(0.03).epsilon(1e-15));
}

TEST_CASE("assumption report on the example profile", "[synthesis]") {
  const SpiralProfile p = example_profile();
  const auto rep = validate_assumptions(p, 0.05);
  // Analytic maximum of |r'|/r = (d alpha/dq) / (2 alpha (1 - alpha)) at alpha = 0.2.
  const double slope_oracle = (0.6 / (4.0 * kPi)) / (2.0 * 0.2 * 0.8);
  CHECK(rel_err(rep.max_slope_ratio_r, slope_oracle) < 2e-3);
  const double z_oracle = (0.012 / (4.0 * kPi)) / radius_oracle(0.2);
  CHECK(rel_err(rep.max_slope_ratio_z, z_oracle) < 1e-9);
  // Both slope ratios exceed 0.05 for this schedule; the length approximation holds.
  CHECK_FALSE(rep.slope_r_ok);
  CHECK_FALSE(rep.slope_z_ok);
  const auto [exact, approx] = fine_lengths(4.0 * kPi, 0.012);
  CHECK(rel_err(rep.arc_length_rel_error, (exact - approx) / exact) < 1e-3);
  CHECK(rep.arc_length_rel_error < 0.02);
  CHECK(rep.arc_length_ok);
}

TEST_CASE("compressing the operating range breaks the assumptions", "[synthesis]") {
  const SpiralProfile wide = example_profile();
  const SpiralProfile tight = generate_groove(example_radii(kPi / 2.0), 0.0, 0.012);
  const auto a = validate_assumptions(wide);
  const auto b = validate_assumptions(tight);
  CHECK(rel_err(b.max_slope_ratio_r, 8.0 * a.max_slope_ratio_r) < 1e-9);
  CHECK_FALSE(b.slope_r_ok);
  CHECK_FALSE(b.all_pass());
  const auto [exact, approx] = fine_lengths(kPi / 2.0, 0.012);
  CHECK(rel_err(b.arc_length_rel_error, (exact - approx) / exact) < 1e-2);
  CHECK(b.arc_length_rel_error > 0.05);
}

TEST_CASE("grid too small for slopes", "[synthesis]") {
  SpiralProfile p = generate_groove(example_radii(4.0 * kPi, 2), 0.0, 0.012);
  CHECK_THROWS_AS(validate_assumptions(p), GridError);
  CHECK_THROWS_AS(groove_arc_length(p), GridError);
}

TEST_CASE("arc length properties", "[synthesis]") {
  const SpiralProfile p = example_profile();
  const auto arc = groove_arc_length(p);
  for (std::size_t j = 0; j < p.joints(); ++j)
    for (std::size_t k = 1; k < p.samples(); ++k) {
      CHECK(arc.exact[j][k] > arc.exact[j][k - 1]);
      CHECK(arc.approx[j][k] > arc.approx[j][k - 1]);
      CHECK(arc.exact[j][k] >= arc.approx[j][k]);
    }
  SpiralProfile doubled = p;
  for (auto& r : doubled.r_s)
    for (auto& v : r) v *= 2.0;
  const auto arc2 = groove_arc_length(doubled);
  for (std::size_t k = 0; k < p.samples(); ++k) CHECK(arc2.approx[0][k] == 2.0 * arc.approx[0][k]);
  // The stiffness model's wrapped length is the same integral of r.
  CHECK(rel_err(p.wrapped_length(0, 0.0, 4.0 * kPi), arc.approx[0].back()) < 1e-12);
}

TEST_CASE("profile export", "[synthesis]") {
  const SpiralProfile p = example_profile();
  SECTION("csv layout") {
    const std::string csv = profile_to_csv(p);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "q_s_rad,theta_deg,r_mm,z_mm,joint_index,groove_side");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * 2 * p.grooves[0].primary.size());
    CHECK(profile_to_csv(p) == csv);
  }
  SECTION("json round trip") {
    const SpiralProfile back = profile_from_json(nlohmann::json::parse(profile_to_json(p).dump(1)));
    REQUIRE(back.samples() == p.samples());
    for (std::size_t k = 0; k < p.samples(); ++k) {
      CHECK(std::abs(back.r_s[1][k] - p.r_s[1][k]) <= 1e-12 * p.r_s[1][k]);
      CHECK(std::abs(back.z_s[k] - p.z_s[k]) <= 1e-12 * 0.012);
    }
    for (std::size_t i = 0; i < p.grooves[1].mirrored.size(); ++i)
      CHECK(back.grooves[1].mirrored[i].theta == p.grooves[1].mirrored[i].theta);
  }
  SECTION("files") {
    const auto dir = scratch_dir("profile_export");
    export_profile(p, ProfileFormat::csv, dir / "profile.csv");
    export_profile(p, ProfileFormat::json, dir / "profile.json");
    CHECK(read_file(dir / "profile.csv") == profile_to_csv(p));
    CHECK(profile_from_json(nlohmann::json::parse(read_file(dir / "profile.json"))).samples() == p.samples());
    CHECK_THROWS_AS(export_profile(p, ProfileFormat::csv, dir / "missing" / "profile.csv"), IoError);
  }
  SECTION("empty grid") {
    CHECK_THROWS_AS(profile_to_csv(SpiralProfile{}), GridError);
    CHECK_THROWS_AS(profile_to_json(SpiralProfile{}), GridError);
  }
}
