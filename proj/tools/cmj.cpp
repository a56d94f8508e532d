#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cmj/config.hpp"
#include "cmj/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fluctuation analysis of lattice Crump-Mode-Jagers branching processes"};
  app.set_version_flag("--version", std::string(cmj::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<unsigned> threads;
  bool print_config = false;

  const std::pair<const char*, const char*> commands[] = {
      {"analyze", "classify the regime from the roots of mu_hat(z) = 1"},
      {"limits", "limit variances, lagged covariances and the limit measure"},
      {"simulate", "one exact trace to the horizon"},
      {"verify", "Monte Carlo verification against the limit theory"},
      {"predict", "best linear one-step predictor and its backtest"},
      {"run", "run the command named in the config"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "directory for the output files");
    sub->add_option("-j,--threads", threads, "worker threads for replicates (0: all cores)");
    sub->add_flag("--print-config", print_config, "echo the canonical config and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  cmj::RunConfig config;
  try {
    config = cmj::load_config(config_path);
  } catch (const cmj::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  if (command != "run") config.command = command;
  if (output_dir) config.output_dir = *output_dir;
  if (threads) config.experiment.threads = *threads;
  if (print_config) {
    std::cout << cmj::serialize(config);
    return 0;
  }
  return cmj::dispatch(config, std::cout, std::cerr);
}
