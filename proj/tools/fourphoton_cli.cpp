#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fourphoton/config.hpp"
#include "fourphoton/harness.hpp"

using namespace fourphoton;

int main(int argc, char** argv) {
  CLI::App app{"Four-photon source simulator"};
  std::string scenario, config, out;
  std::uint64_t seed = 0, pulses = 0;
  bool validate_only = false, list = false;
  app.add_option("--scenario", scenario, "table1, same-pair-dips, entangled-dips, cross-pair, heralded, stability, rates");
  app.add_option("--config", config, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory (default: $FOURPHOTON_OUT or ./results)");
  auto* pulses_opt = app.add_option("--pulses", pulses, "pulses per scan point, overrides the config");
  app.add_flag("--validate-only", validate_only, "check the config and exit");
  app.add_flag("--list", list, "print scenario names");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (list) {
    for (const auto& n : scenario_names()) std::cout << n << '\n';
    return kExitOk;
  }
  if (!scenario.empty() && !is_known_scenario(scenario)) {
    std::cerr << "unknown scenario '" << scenario << "'\n";
    return kExitUsage;
  }
  if (validate_only) {
    if (config.empty()) {
      std::cerr << "--validate-only needs --config\n";
      return kExitUsage;
    }
    try {
      const ValidationReport rep = validate_config(config);
      if (rep.ok()) {
        std::cout << config << ": ok\n";
        return kExitOk;
      }
      std::cerr << rep.to_string();
      return kExitInvalidConfig;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kExitRuntime;
    }
  }
  if (scenario.empty()) {
    std::cerr << "missing --scenario\n" << app.help();
    return kExitUsage;
  }

  Scenario sc;
  sc.name = scenario;
  sc.config_path = config;
  if (seed_opt->count()) sc.seed = seed;
  if (pulses_opt->count()) sc.pulses = pulses;
  sc.out_dir = out;
  return run_scenario(sc, std::cerr);
}
