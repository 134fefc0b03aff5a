#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "klyap/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov functions from the Koopman generator"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("command", command, "check | solve | oracle | compare | laguerre")->required();
  app.add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: output_dir from the config)");
  app.add_option("--seed", seed, "seed for random sample points");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const auto cmd = klyap::cli::parse_command(command);
    const auto cfg = klyap::cli::load_config(config_path);
    const auto report = klyap::cli::run(cmd, cfg, out_dir.empty() ? cfg.output_dir : out_dir, seed);
    std::cout << report.text() << "\n";
    return report.exit_code();
  } catch (const klyap::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}
