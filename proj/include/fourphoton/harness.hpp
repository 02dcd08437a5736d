#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourphoton/config.hpp"

namespace fourphoton {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvalidConfig = 3;

struct Scenario {
  std::string name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  /// Overrides pulses_per_point of scan scenarios.
  std::optional<std::uint64_t> pulses;
};

const std::vector<std::string>& scenario_names();
bool is_known_scenario(const std::string& name);

/// Runs one scenario and returns the process exit status. Diagnostics go to
/// `log`. Result files plus manifest.json are written to scenario.out_dir.
int run_scenario(const Scenario& scenario, std::ostream& log);

/// Runs a scenario on an already parsed config and returns the names of the
/// files written (without the manifest). Throws ConfigError when a section
/// the scenario needs is missing.
std::vector<std::string> execute_scenario(const std::string& name, const RunConfig& config, std::uint64_t seed,
                                          const std::string& out_dir, std::optional<std::uint64_t> pulses);

/// 64-bit FNV-1a of the compact JSON dump.
std::uint64_t config_hash(const nlohmann::json& doc);

/// Output directory from FOURPHOTON_OUT, else "results".
std::string default_output_dir();

}  // namespace fourphoton
