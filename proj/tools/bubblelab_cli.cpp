// bubblelab: run configs in, branches and reports out.
//
//   bubblelab branch   --config run.json [--out dir] [--window lo,hi]
//   bubblelab verify   --config run.json
//   bubblelab spectrum --config run.json
//   bubblelab pohozaev --config run.json
//
// Exit codes: 0 success, 2 config error, 3 solver failure, 4 assertion failure.

#include <CLI11.hpp>

#include <iostream>

#include "bubblelab/cli.hpp"
#include "bubblelab/errors.hpp"

namespace cli = bubblelab::cli;

namespace {

int fail(int code, const std::string& kind, const std::string& message,
         const std::vector<std::string>& fields = {}) {
  std::cerr << cli::error_json(code, kind, message, fields).dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blow-up branches of the singular mean field equation on the unit disk"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir, window;
  for (const char* name : {"branch", "verify", "spectrum", "pohozaev"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Run config (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--window", window, "Fit window lo,hi (overrides window)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(cli::exit_config, "usage", e.what());
  }
  const std::string command = app.get_subcommands().front()->get_name();

  cli::RunConfig config;
  try {
    config = cli::load_config(config_path);
    if (!window.empty()) {
      const auto comma = window.find(',');
      double lo = 0.0, hi = 0.0;
      try {
        if (comma == std::string::npos) throw std::invalid_argument("no comma");
        lo = std::stod(window.substr(0, comma));
        hi = std::stod(window.substr(comma + 1));
      } catch (const std::exception&) {
        throw bubblelab::ConfigError("--window must be lo,hi", {"--window"});
      }
      if (!(lo < hi)) throw bubblelab::ConfigError("--window needs lo < hi", {"--window"});
      config.window = {lo, hi};
    }
  } catch (const bubblelab::ConfigError& e) {
    return fail(cli::exit_config, "config", e.what(), e.fields());
  }
  const std::filesystem::path out = out_dir.empty() ? config.output_dir : out_dir;

  try {
    cli::CommandOutput result;
    if (command == "branch") result = cli::cmd_branch(config, out);
    else if (command == "verify") result = cli::cmd_verify(config, out);
    else if (command == "spectrum") result = cli::cmd_spectrum(config, out);
    else result = cli::cmd_pohozaev(config, out);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : result.files) files.push_back(f.string());
    result.summary["files"] = files;
    result.summary["exit_code"] = result.exit_code;
    std::cout << result.summary.dump() << std::endl;
    if (result.exit_code == cli::exit_solver)
      return fail(cli::exit_solver, "solver", result.summary.value("failure", "solver failure"));
    return result.exit_code;
  } catch (const bubblelab::ConfigError& e) {
    return fail(cli::exit_config, "config", e.what(), e.fields());
  } catch (const std::exception& e) {
    return fail(cli::exit_solver, "solver", e.what());
  }
}
