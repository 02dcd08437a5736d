#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fourphoton/filter.hpp"
#include "fourphoton/polstate.hpp"

namespace fourphoton {

enum class DipSign { kDip, kAntiDip };

/// Fitted Gaussian dip. `visibility` is signed: positive for a dip, negative
/// for an anti-dip; its magnitude comes from dip_visibility or
/// antidip_visibility evaluated at the fitted extrema.
struct DipShape {
  double baseline = 0.0;
  double extremum = 0.0;  // fitted value at the centre
  double visibility = 0.0;
  double fwhm_spatial_um = 0.0;
  double center_um = 0.0;
  DipSign sign = DipSign::kDip;
  bool width_defined = true;
  double residual_norm = 0.0;
  int iterations = 0;
};

struct ScanPoint {
  double delay_um = 0.0;
  double delay_fs = 0.0;
  double counts = 0.0;
  double rate_hz = 0.0;
};

/// Coincidence counts versus stage delay.
struct InterferenceScan {
  std::vector<ScanPoint> points;
  /// Expected multi-photon contribution per point, in counts (0 if unknown).
  double multiphoton_counts = 0.0;
  /// Acquisition time per point, seconds (0 if counts are synthetic).
  double dwell_s = 0.0;
};

/// |<f_a|f_b(delay)>|^2 for Gaussian wavepackets shaped by the two filters.
/// Throws UnsupportedModelError for long-pass filters.
double temporal_overlap(double delay_fs, const FilterSpec& fa, const FilterSpec& fb);

/// temporal_overlap averaged over a Gaussian relative arrival-time offset
/// with standard deviation `relative_sigma_fs`.
double smeared_overlap(double delay_fs, const FilterSpec& fa, const FilterSpec& fb,
                       double relative_sigma_fs);

/// Coincidence rate behind a balanced coupler:
/// baseline * (1 - overlap(delay) * Tr(rho SWAP)).
double hom_rate(const PolarizationState& state, double delay_fs, const FilterSpec& fa,
                const FilterSpec& fb, double baseline);

/// (max - min) / (max + min). Requires max >= min >= 0 and max > 0.
double dip_visibility(double cc_max, double cc_min);

/// (max - min) / (3 min - max) for a peak above the baseline `cc_min`.
double antidip_visibility(double cc_max, double cc_min);

/// Dip width in stage travel to equivalent spectral FWHM, nm.
double fwhm_spatial_to_spectral(double fwhm_um, double wavelength_nm);
/// Inverse of fwhm_spatial_to_spectral.
double fwhm_spectral_to_spatial(double fwhm_nm, double wavelength_nm);
/// Stage travel to delay, fs.
double fwhm_spatial_to_temporal(double fwhm_um);
inline double delay_um_to_fs(double delay_um) { return delay_um / kLightMicronsPerFs; }
inline double delay_fs_to_um(double delay_fs) { return delay_fs * kLightMicronsPerFs; }

/// FWHM in delay of 1 - temporal_overlap for two Gaussian filters, fs.
double overlap_fwhm_fs(const FilterSpec& fa, const FilterSpec& fb);

/// Least-squares Gaussian fit of a dip or anti-dip. Needs at least seven
/// points. A flat scan gives visibility 0 with `width_defined == false`.
/// Throws FitError when the iteration does not converge.
DipShape fit_dip(const InterferenceScan& scan);

/// Visibility after removing a constant background from the fitted curve.
double subtracted_visibility(const DipShape& dip, double background);

void write_scan_csv(std::ostream& out, const InterferenceScan& scan);
InterferenceScan read_scan_csv(std::istream& in);

nlohmann::json to_json(const DipShape& dip);
DipShape dip_from_json(const nlohmann::json& doc);

/// Fixed-precision number formatting shared by all CSV writers.
std::string format_number(double value);

}  // namespace fourphoton
