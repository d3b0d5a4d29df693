#include "support.hpp"

#include <array>
#include <map>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dsj/cli.hpp"

using namespace dsj;
using namespace dsj::test;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::string& sub, const std::filesystem::path& out_dir, std::vector<std::string> overrides = {},
                std::filesystem::path config = {}) {
  cli::CliInvocation inv;
  inv.subcommand = sub;
  inv.out_dir = out_dir;
  inv.overrides = std::move(overrides);
  inv.config = std::move(config);
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(inv, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

/// Runs the built executable; returns the exit status and captured stdout.
Outcome run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + DSJ_CLI_PATH + "\" " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const std::filesystem::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("every subcommand succeeds on the shipped config", "[cli]") {
  const std::map<std::string, std::string> produces{
      {"synth", "profile.csv"}, {"ellipse", "ellipse.csv"}, {"grasp", "grasp.csv"}, {"step", "step.csv"}, {"validate", ""}};
  for (const auto& [sub, file] : produces) {
    const auto dir = scratch_dir("cli_" + sub);
    const auto o = run_cli(sub, dir);
    INFO(sub << ": " << o.err);
    REQUIRE(o.code == 0);
    // stdout carries the manifest path and nothing else.
    CHECK(o.out == (dir / "manifest.json").string() + "\n");
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["command"]["subcommand"] == sub);
    CHECK(manifest["config_sha256"] == sha256_hex(default_raw().dump()));
    if (file.empty()) {
      CHECK(manifest["outputs"].empty());
    } else {
      REQUIRE(manifest["outputs"].size() == 1);
      CHECK(manifest["outputs"][0]["path"] == file);
      CHECK(std::filesystem::file_size(dir / file) > 0);
    }
  }
}

TEST_CASE("synth writes the expected endpoint radii", "[cli]") {
  const auto dir = scratch_dir("cli_synth_radii");
  REQUIRE(run_cli("synth", dir).code == 0);
  // Equal springs and radii: K_max = k r^2 / 2 [[2,1],[1,1]] and the spiral needs alpha / (1 - alpha) of it,
  // so r_s = r sqrt(alpha / (2 (1 - alpha))).
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  const auto& radii = manifest["summary"]["endpoint_radii"];
  REQUIRE(radii.size() == 2);
  for (const auto& r : radii) {
    CHECK(r["r_first_m"].get<double>() == Catch::Approx(0.003 * std::sqrt(2.0)).epsilon(1e-9));
    CHECK(r["r_last_m"].get<double>() == Catch::Approx(0.012 * std::sqrt(2.0)).epsilon(1e-9));
  }
  std::istringstream csv(slurp(dir / "profile.csv"));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "q_s_rad,theta_deg,r_mm,z_mm,joint_index,groove_side");
  CHECK(first.rfind("0,0,4.24264068711928", 0) == 0);
}

TEST_CASE("synth can export the profile as JSON", "[cli]") {
  const auto dir = scratch_dir("cli_synth_json");
  cli::CliInvocation inv;
  inv.subcommand = "synth";
  inv.out_dir = dir;
  inv.profile_format = ProfileFormat::json;
  std::ostringstream out, err;
  REQUIRE(cli::run(inv, out, err) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "profile.json"));
  CHECK(profile_from_json(doc).samples() == 361);
}

TEST_CASE("failures map to their exit codes", "[cli]") {
  const auto dir = scratch_dir("cli_errors");
  CHECK(run_cli("synth", dir / "a", {"schedule.alpha_max=1.0"}).code == 3);
  CHECK(run_cli("synth", dir / "b", {"schedule.alpha_mx=0.7"}).code == 2);
  CHECK(run_cli("synth", dir / "c", {"springs.k_s=-1"}).code == 2);
  CHECK(run_cli("synth", dir / "d", {}, dir / "missing.json").code == 5);
  std::ofstream(dir / "blocker") << "x";
  CHECK(run_cli("synth", dir / "blocker" / "out").code == 5);
  CHECK(run_cli("frobnicate", dir / "e").code == 2);

  const auto failed = run_cli("synth", dir / "f", {"schedule.alpha_max=1.0"});
  CHECK(failed.out.empty());
  CHECK(failed.err.find("error:") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "f" / "manifest.json"));
}

TEST_CASE("overrides reach the pipeline and the config digest", "[cli]") {
  const auto a = scratch_dir("cli_override_a"), b = scratch_dir("cli_override_b");
  REQUIRE(run_cli("synth", a).code == 0);
  REQUIRE(run_cli("synth", b, {"schedule.alpha_max=0.7"}).code == 0);
  const auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
  const auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
  CHECK(ma["config_sha256"] != mb["config_sha256"]);
  CHECK(mb["summary"]["endpoint_radii"][0]["r_last_m"].get<double>() <
        ma["summary"]["endpoint_radii"][0]["r_last_m"].get<double>());
}

TEST_CASE("explicit config file and built-in default agree", "[cli]") {
  const auto a = scratch_dir("cli_cfg_a"), b = scratch_dir("cli_cfg_b");
  REQUIRE(run_cli("grasp", a).code == 0);
  REQUIRE(run_cli("grasp", b, {}, std::filesystem::path(DSJ_SOURCE_DIR) / "config" / "dsj_default.json").code == 0);
  CHECK(slurp(a / "grasp.csv") == slurp(b / "grasp.csv"));
}

TEST_CASE("data files are identical across runs", "[cli]") {
  for (const std::string sub : {"synth", "ellipse", "grasp", "step"}) {
    const auto a = scratch_dir("cli_det_a_" + sub), b = scratch_dir("cli_det_b_" + sub);
    REQUIRE(run_cli(sub, a).code == 0);
    REQUIRE(run_cli(sub, b).code == 0);
    const auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
    CHECK(ma["outputs"] == mb["outputs"]);
    CHECK(ma["summary"] == mb["summary"]);
  }
}

TEST_CASE("executable help, parse errors and a full run", "[cli][binary]") {
  const auto help = run_binary("--help");
  CHECK(help.code == 0);
  for (const char* sub : {"synth", "ellipse", "grasp", "step", "validate"}) CHECK(help.out.find(sub) != std::string::npos);
  const auto sub_help = run_binary("synth --help");
  CHECK(sub_help.code == 0);
  for (const char* flag : {"--config", "--out", "--set", "--format"}) CHECK(sub_help.out.find(flag) != std::string::npos);

  CHECK(run_binary("").code == 2);
  CHECK(run_binary("synth --bogus").code == 2);
  CHECK(run_binary("synth --format yaml").code == 2);

  const auto dir = scratch_dir("cli_binary");
  const auto ok = run_binary("validate --out \"" + dir.string() + "\" --set schedule.alpha_max=0.75");
  CHECK(ok.code == 0);
  CHECK(ok.out == (dir / "manifest.json").string() + "\n");
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["command"]["arguments"].size() == 5);
  CHECK(run_binary("synth --out \"" + dir.string() + "\" --set schedule.alpha_max=1.0").code == 3);
}
