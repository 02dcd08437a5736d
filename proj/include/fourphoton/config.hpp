#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourphoton/filter.hpp"
#include "fourphoton/polstate.hpp"
#include "fourphoton/source_mc.hpp"

namespace fourphoton {

struct Violation {
  std::string key;  // dotted path, e.g. "source.kappa_forward"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

struct RatesSection {
  double duration_s = 60.0;
  int batches = 1;
  double dark_count_hz = 0.0;
  double dead_time_ns = 0.0;
  bool write_timestamps = false;
};

struct JitterCalibration {
  double target_raw_visibility = 0.088;
  FilterSpec filter = FilterSpec::gaussian(826.0, 3.8);
  ModePair mode_pair = ModePair::k13;
};

struct CrossPairSection {
  std::vector<double> delays_um;
  std::uint64_t pulses_per_point = 0;
  std::vector<ModePair> mode_pairs{ModePair::k13, ModePair::k24};
  std::optional<FilterSpec> overlap_filter;
};

struct HeraldedSection {
  std::vector<double> delays_um;
  std::uint64_t pulses_per_point = 0;
  ModePair mode_pair = ModePair::k13;
  std::optional<FilterSpec> overlap_filter;
  std::optional<FilterSpec> herald_filter;
};

enum class DriftKind { kConstant, kSine, kLinear };

struct StabilitySection {
  double duration_s = 3600.0;
  double bin_s = 60.0;
  DriftKind drift = DriftKind::kSine;
  double amplitude_rad = 0.0;  // sine amplitude, linear slope per hour, or constant offset
  double period_s = 3600.0;
};

struct NamedState {
  std::string name;
  PolarizationState state = PolarizationState::maximally_mixed();
  PolarizationState target = PolarizationState::maximally_mixed();
};

struct Table1Section {
  double mean_counts = 1e4;
  int resamples = 50;
  int max_iters = 20000;
  double tol = 1e-12;
  std::vector<NamedState> states;
};

struct DipRow {
  std::string label;
  FilterSpec filter = FilterSpec::gaussian(826.0, 3.1);
  PolarizationState state = PolarizationState::maximally_mixed();
};

struct DipSection {
  std::vector<double> delays_um;
  double baseline_counts = 1e4;
  std::vector<DipRow> rows;
};

/// All sections are optional; each scenario checks for the ones it needs.
struct RunConfig {
  std::optional<SourceSettings> source;
  CoincidenceConfig coincidence;
  std::optional<RatesSection> rates;
  std::optional<JitterCalibration> jitter_calibration;
  std::optional<CrossPairSection> cross_pair;
  std::optional<HeraldedSection> heralded;
  std::optional<StabilitySection> stability;
  std::optional<Table1Section> table1;
  std::optional<DipSection> same_pair_dips;
  std::optional<DipSection> entangled_dips;
};

/// Parses a config document, collecting every violation instead of stopping
/// at the first one.
RunConfig parse_config(const nlohmann::json& doc, ValidationReport& report);
/// Throws ConfigError listing all violations.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads and checks a config file without running anything. Throws
/// std::runtime_error when the file cannot be read.
ValidationReport validate_config(const std::string& path);
nlohmann::json load_json_file(const std::string& path);

/// Parses a state description: product, bell, mixed_phi, cascade or matrix.
PolarizationState parse_state(const nlohmann::json& spec);

}  // namespace fourphoton
