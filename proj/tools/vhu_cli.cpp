// Command-line front end: vhu <command> [-c file.cfg] [key=value ...]
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vhu/commands.hpp"
#include "vhu/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hadamard-domain bias field correction toolkit"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "write a synthetic phantom dataset (out=DIR n= seed= order= range_lo= range_hi= ...)"},
      {"train", "train a model on a simulated dataset (data=DIR out=DIR epochs= seed= ...)"},
      {"correct", "apply a checkpoint to containers (checkpoint=FILE inputs=A,B,DIR out=DIR)"},
      {"evaluate", "compute metrics against a dataset (data=DIR [predictions=DIR] out=FILE.csv)"},
      {"fwht", "Walsh-Hadamard transform (values=1,2,3,4 | input=FILE entry= output=FILE) [inverse=true]"},
  };
  std::string config_file;
  std::vector<std::string> settings;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_file, "key = value config file");
    sub->add_option("settings", settings, "key=value overrides");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : vhu::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  vhu::ConfigMap config;
  try {
    if (!config_file.empty()) config = vhu::load_config(config_file);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw vhu::ConfigError("expected key=value, got '" + s + "'");
      config[s.substr(0, eq)] = s.substr(eq + 1);
    }
  } catch (const vhu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vhu::kExitConfig;
  }
  return vhu::run_command(name, config, std::cout, std::cerr);
}
