#include "ccbm/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Robin cavity reconstruction with the coupled complex boundary method"};
  std::string mode_name, config_path, out_dir;
  std::vector<std::string> overrides;
  int workers = 0;
  app.add_option("mode", mode_name, "synthesize | reconstruct-ccbm | reconstruct-admm | verify-gradient | sweep")
      ->required();
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--set", overrides, "key=value override, applied after the file")->take_all();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--workers", workers, "sweep worker limit (overrides CAVITY_CCBM_WORKERS)")->check(CLI::NonNegativeNumber);
  app.add_flag_callback(
      "--list-presets",
      [] {
        for (const auto& p : ccbm::preset_names()) std::cout << p << "\n";
        throw CLI::Success();
      },
      "print the preset names and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const ccbm::RunMode mode = ccbm::parse_run_mode(mode_name);
    if (workers > 0) overrides.push_back("sweep.workers=" + std::to_string(workers));
    const ccbm::RunConfig cfg = ccbm::load_config(config_path, overrides);
    return ccbm::run(mode, cfg, out_dir);
  } catch (const ccbm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
