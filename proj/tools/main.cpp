// ccgate command line: configuration-driven experiment runner.
//
//   ccgate run <spec-file> [--out DIR] [--threads N] [--preset NAME]
//   ccgate presets
//
// Exit codes: 0 success, 2 spec parse error, 3 physics precondition failure,
// 4 integration failure. CCGATE_OUT_DIR overrides the default output dir.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ccgate/errors.hpp"
#include "ccgate/experiment.hpp"

namespace cx = ccgate::experiment;

int main(int argc, char** argv) {
  CLI::App app{"coupled-cavity controlled-phase-gate simulator"};
  app.set_version_flag("--version", std::string("ccgate ") + ccgate::kVersion);
  app.require_subcommand(1);

  std::string spec_file;
  std::string out_dir;
  std::string preset_override;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  CLI::App* run = app.add_subcommand("run", "execute an experiment spec file");
  run->add_option("spec-file", spec_file, "declarative experiment description")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (default: CCGATE_OUT_DIR or .)");
  run->add_option("--threads", threads, "sweep worker count")->check(CLI::PositiveNumber);
  run->add_option("--preset", preset_override, "override the spec's preset");

  CLI::App* presets = app.add_subcommand("presets", "list bundled parameter presets");

  CLI11_PARSE(app, argc, argv);

  if (presets->parsed()) {
    for (const auto& name : cx::preset_names()) std::cout << name << "\n";
    return 0;
  }

  if (out_dir.empty()) {
    const char* env = std::getenv("CCGATE_OUT_DIR");
    out_dir = env ? env : ".";
  }

  try {
    cx::ExperimentSpec spec = cx::parse_spec_file(spec_file);
    if (!preset_override.empty()) spec.preset = preset_override;
    const cx::RunArtifacts artifacts = cx::run_experiment(spec, out_dir, threads);
    std::cout << "wrote " << artifacts.csv.string() << "\n"
              << "wrote " << artifacts.manifest.string() << "\n";
    return cx::kExitOk;
  } catch (const ccgate::ConfigError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return cx::kExitParseError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return cx::kExitParseError;
  } catch (const ccgate::PreconditionError& e) {
    std::cerr << "physics precondition: " << e.what() << "\n";
    return cx::kExitPrecondition;
  } catch (const ccgate::IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << "\n";
    return cx::kExitIntegration;
  }
}
