#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fourphoton/filter.hpp"
#include "fourphoton/interference.hpp"
#include "fourphoton/polstate.hpp"
#include "fourphoton/rng.hpp"

namespace fourphoton {

/// Generation parameters for the two pumping directions. Forward pairs feed
/// modes 1 and 2, backward pairs modes 3 and 4; index i of the per-mode arrays
/// is mode i + 1.
struct SourceSettings {
  double kappa_forward = 0.06;
  double kappa_backward = 0.06;
  double alpha_forward = 0.0;
  double alpha_backward = 0.0;
  double phi_forward = 0.0;
  double phi_backward = 0.0;
  double dephasing_forward = 1.0;
  double dephasing_backward = 1.0;
  double jitter_sigma_fs = 0.0;
  std::array<double, 4> coupling_efficiency{0.1, 0.1, 0.1, 0.1};
  double rep_rate_hz = 80e6;
  /// Relative weight w of the double-pair term: P(n) ~ {1, k^2, w k^4}.
  /// The truncated expansion of the squeezed state gives w = 1/4.
  double double_pair_weight = 0.25;
  std::array<FilterSpec, 4> filters{FilterSpec::gaussian(826.0, 3.8), FilterSpec::gaussian(826.0, 3.8),
                                    FilterSpec::gaussian(826.0, 3.8), FilterSpec::gaussian(826.0, 3.8)};
  /// Replace the cascade state of a direction when set.
  std::optional<PolarizationState> state_forward;
  std::optional<PolarizationState> state_backward;

  PolarizationState forward_state() const;
  PolarizationState backward_state() const;
  /// Throws DomainError naming the offending field. A zero kappa switches
  /// that direction off.
  void validate() const;
};

struct CoincidenceConfig {
  double twofold_window_ns = 5.0;
  double fourfold_window_ns = 460.0;
  void validate() const;
};

/// Per-mode click times in integer picoseconds from the start of the run.
struct DetectionRecord {
  std::array<std::vector<std::int64_t>, 4> times_ps;
  double duration_s = 0.0;
};

struct CountSummary {
  std::array<double, 4> singles_hz{};
  double pair_rate_forward_hz = 0.0;   // 1&2
  double pair_rate_backward_hz = 0.0;  // 3&4
  double cross_rate_13_hz = 0.0;
  double cross_rate_24_hz = 0.0;
  double fourfold_per_min = 0.0;
  /// Four-folds whose two TAC events come from different pump pulses.
  double fourfold_accidental_per_min = 0.0;
  double duration_s = 0.0;
};

struct RunOptions {
  /// Number of worker batches; results do not depend on it.
  int batches = 1;
  double dark_count_hz = 0.0;
  double dead_time_ns = 0.0;
  /// Optional polarization analyzers in front of each pair's two detectors.
  std::optional<Projector> analyzer_forward;
  std::optional<Projector> analyzer_backward;
};

enum class ModePair { k13, k24 };

/// Normalized {P0, P1, P2} for amplitude kappa and double-pair weight w.
std::array<double, 3> pair_probabilities(double kappa, double double_pair_weight);
/// Amplitude whose single-pair probability per pulse equals p1.
double kappa_for_pair_probability(double p1, double double_pair_weight);

/// Number of pairs in one pulse. Requires kappa in (0, 0.5).
int sample_pair_number(double kappa, Rng& rng, double double_pair_weight = 0.25);

/// Greedy earliest-first matching of two sorted streams; each event is used
/// at most once. Returns matched index pairs.
std::vector<std::pair<std::size_t, std::size_t>> match_coincidences(
    const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b, double window_ns);
std::size_t count_coincidences(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                               double window_ns);

struct RunResult {
  DetectionRecord record;
  CountSummary summary;
};

RunResult simulate_run(const SourceSettings& settings, const CoincidenceConfig& coinc, double duration_s,
                       std::uint64_t seed, const RunOptions& options = {});

CountSummary summarize(const DetectionRecord& record, const CoincidenceConfig& coinc, double rep_rate_hz);

/// Expected double-pair coincidence rate in the monitored pair (Hz).
double multiphoton_baseline(const SourceSettings& settings, ModePair pair, bool heralded = false);

/// Analytic expected coincidence rate at one delay, lowest order in kappa:
/// cross-pair term with jitter-smeared overlap plus multiphoton_baseline.
double expected_scan_rate(const SourceSettings& settings, double delay_um, ModePair pair, bool heralded);

/// Raw visibility of expected_scan_rate between zero and infinite delay.
double expected_raw_visibility(const SourceSettings& settings, ModePair pair, bool heralded);

/// Jitter sigma (fs) for which expected_raw_visibility equals `target`.
/// Throws DomainError when the target lies outside the reachable range.
double calibrate_jitter(SourceSettings settings, ModePair pair, bool heralded, double target);

/// Two photons from different pairs meet on a balanced coupler; counts
/// two-folds between its outputs, or four-folds together with the two
/// heralding modes. Each delay point uses its own random stream.
InterferenceScan simulate_hom_scan(const SourceSettings& settings, const std::vector<double>& delays_um,
                                   ModePair pair, bool heralded, std::uint64_t pulses_per_point,
                                   std::uint64_t seed, int batches = 1);

struct StabilityBin {
  double t_s = 0.0;
  double phi = 0.0;
  double counts = 0.0;
  double expected_counts = 0.0;
  double relative_rate = 0.0;  // counts / expected counts at phi = 0
};

/// Forward pairs projected onto D (mode 1) and R (mode 2), coincidences
/// binned in time while the phase drifts as phi_forward + drift(t).
std::vector<StabilityBin> simulate_stability(const SourceSettings& settings,
                                             const std::function<double(double)>& phase_drift,
                                             double duration_s, double bin_s, std::uint64_t seed);

/// Probability per pulse of a 1&2 (or 3&4) coincidence for one direction,
/// with optional analyzers, exact for up to two pairs.
double expected_pair_coincidence_probability(const SourceSettings& settings, bool forward,
                                             const std::optional<Projector>& analyzer);

nlohmann::json to_json(const CountSummary& summary);
CountSummary summary_from_json(const nlohmann::json& doc);

/// Little-endian binary stream: u64 header length, JSON header, then for each
/// mode a u64 event count followed by int64 picosecond timestamps.
void write_record(std::ostream& out, const DetectionRecord& record);
DetectionRecord read_record(std::istream& in);

}  // namespace fourphoton
