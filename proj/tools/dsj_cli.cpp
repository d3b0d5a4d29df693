// dsj: spiral pulley synthesis and evaluation for dual-spiral-joint fingers.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "dsj/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Design and evaluate variable-stiffness spiral pulleys", "dsj"};
  app.set_version_flag("--version", dsj::kToolVersion);
  app.require_subcommand(1);

  dsj::cli::CliInvocation inv;
  std::string config;
  std::string out_dir = "dsj_out";
  std::vector<std::string> overrides;
  std::string format = "csv";

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "solve spiral radii and write the groove profile"},
      {"ellipse", "regress stiffness ellipses at the experiment stiffness levels"},
      {"grasp", "trace grasp force against finger-tip deviation"},
      {"step", "simulate joint step responses"},
      {"validate", "check the configuration and profile assumptions"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "configuration JSON (default: built-in)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--set", overrides, "override a config value, e.g. springs.k_s=900")->take_all();
    if (name == "synth")
      sub->add_option("--format", format, "profile export format")
          ->check(CLI::IsMember({"csv", "json"}))
          ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return static_cast<int>(dsj::ErrorCategory::config);
  }

  inv.subcommand = app.get_subcommands().front()->get_name();
  inv.config = config;
  inv.out_dir = out_dir;
  inv.overrides = overrides;
  inv.profile_format = format == "json" ? dsj::ProfileFormat::json : dsj::ProfileFormat::csv;
  return dsj::cli::run(inv, std::cout, std::cerr, std::vector<std::string>(argv + 1, argv + argc));
}
