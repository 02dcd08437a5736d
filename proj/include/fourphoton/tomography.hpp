#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourphoton/polstate.hpp"

namespace fourphoton {

/// One analyzer configuration: a half-wave plate, then a quarter-wave plate,
/// then a polarizer passing H, in front of each photon's coupler.
struct TomographySetting {
  WaveplateSetting hwp1{WaveplateKind::kHalfWave, 0.0};
  WaveplateSetting qwp1{WaveplateKind::kQuarterWave, 0.0};
  WaveplateSetting hwp2{WaveplateKind::kHalfWave, 0.0};
  WaveplateSetting qwp2{WaveplateKind::kQuarterWave, 0.0};
  std::string label;  // e.g. "DR"
  Projector projector{pol::H(), pol::H()};
};

struct TomographyEntry {
  TomographySetting setting;
  double counts = 0.0;
};

struct TomographyRecord {
  std::vector<TomographyEntry> entries;
  double acquisition_s = 1.0;
};

/// Ket selected by an HWP/QWP pair followed by an H polarizer.
Ket2 analyzer_ket(const WaveplateSetting& hwp, const WaveplateSetting& qwp);

/// The 36 products of {H, V, D, A, R, L}; photon 1 varies slowest.
std::vector<TomographySetting> projection_set();

/// Poisson counts with mean mean_counts * projection probability.
TomographyRecord simulate_tomography(const PolarizationState& state, double mean_counts, std::uint64_t seed);

/// Counts equal to their expectation (non-integer).
TomographyRecord expected_tomography(const PolarizationState& state, double mean_counts);

struct MlOptions {
  int max_iters = 20000;
  double tol = 1e-12;
};

struct MlResult {
  PolarizationState state = PolarizationState::maximally_mixed();
  bool converged = false;
  int iterations = 0;
  std::vector<double> log_likelihood;  // one entry per accepted iterate, starting at the initial state
};

/// Maximum-likelihood state by diluted R rho R iteration from the maximally
/// mixed state. Throws DomainError when the projectors are not
/// informationally complete or no counts were recorded.
MlResult ml_reconstruct(const TomographyRecord& record, const MlOptions& options = {});

double log_likelihood(const TomographyRecord& record, const PolarizationState& state);

struct MetricsReport {
  double purity = 0.0, negativity = 0.0, fidelity = 0.0;
  double purity_sd = 0.0, negativity_sd = 0.0, fidelity_sd = 0.0;
  int resamples = 0;
  bool converged = true;
};

/// Metrics of the reconstructed state against `target`, with standard
/// deviations over `resamples` Poisson resamplings of the observed counts.
MetricsReport metrics_report(const TomographyRecord& record, const PolarizationState& target, int resamples,
                             std::uint64_t seed, const MlOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);

/// Columns setting_index, hwp1_deg, qwp1_deg, hwp2_deg, qwp2_deg, counts.
void write_tomography_csv(std::ostream& out, const TomographyRecord& record);
/// Projectors are rebuilt from the waveplate angles.
TomographyRecord read_tomography_csv(std::istream& in);

}  // namespace fourphoton
