#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "orepanel/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"orepanel - spatial panel pipeline around mineral deposits"};
  app.require_subcommand(1);

  std::string config_path = "orepanel.json";
  app.add_option("-c,--config", config_path, "JSON run configuration")->required();

  for (const char* name : {"grid", "classify", "ingest", "screen", "panel", "stack",
                           "estimate", "describe", "synth", "all"})
    app.add_subcommand(name);

  CLI11_PARSE(app, argc, argv);
  std::string sub = app.get_subcommands().front()->get_name();

  try {
    auto cfg = orepanel::RunConfig::from_json_file(config_path);
    return orepanel::run(sub, cfg);
  } catch (const orepanel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const orepanel::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
